//! Aligning subword-tokenized trees with word-level reference trees:
//! re-fusing pre-split words, then expanding multi-piece words into
//! `SWC` nodes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::treebank::bpe::{strip_marker, BpeModel};
use crate::treebank::preprocess::{remove_punctuation, strip_labels, SWC_LABEL};
use crate::trees::{ConstTree, Span};

/// Where a matched token attaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeDirection {
    /// Onto the preceding token.
    Left,
    /// Onto the following token.
    Right,
    /// Onto the preceding token when it is a number.
    LeftNumeric,
    /// Onto a numeric neighbor, the following one first.
    AdjacentNumeric,
}

impl fmt::Display for MergeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergeDirection::Left => "left",
            MergeDirection::Right => "right",
            MergeDirection::LeftNumeric => "left-numeric",
            MergeDirection::AdjacentNumeric => "adjacent-numeric",
        })
    }
}

impl FromStr for MergeDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "left" => Ok(MergeDirection::Left),
            "right" => Ok(MergeDirection::Right),
            "left-numeric" => Ok(MergeDirection::LeftNumeric),
            "adjacent-numeric" => Ok(MergeDirection::AdjacentNumeric),
            other => Err(format!("unknown merge direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRule {
    /// Matched against whole tokens, ASCII case-insensitively.
    pub pattern: String,
    pub direction: MergeDirection,
}

/// Ordered rules; the first rule matching a token decides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRuleSet {
    pub rules: Vec<MergeRule>,
}

impl Default for MergeRuleSet {
    /// Contractions and possessives attach left, `%` attaches to a
    /// preceding number, `$` to an adjacent number.
    fn default() -> Self {
        let mut rules: Vec<MergeRule> = ["n't", "'s", "'re", "'ve", "'ll", "'d", "'m", "'"]
            .iter()
            .map(|p| MergeRule {
                pattern: p.to_string(),
                direction: MergeDirection::Left,
            })
            .collect();
        rules.push(MergeRule {
            pattern: "%".into(),
            direction: MergeDirection::LeftNumeric,
        });
        rules.push(MergeRule {
            pattern: "$".into(),
            direction: MergeDirection::AdjacentNumeric,
        });
        MergeRuleSet { rules }
    }
}

impl MergeRuleSet {
    /// One `PATTERN DIRECTION` per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |column: usize, message: String| {
                Error::Parse(ParseError {
                    line: k + 1,
                    column,
                    message,
                })
            };
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(err(
                    1,
                    format!("expected `PATTERN DIRECTION`, found {trimmed:?}"),
                ));
            }
            let direction = fields[1]
                .parse()
                .map_err(|m| err(line.find(fields[1]).unwrap_or(0) + 1, m))?;
            rules.push(MergeRule {
                pattern: fields[0].to_string(),
                direction,
            });
        }
        Ok(MergeRuleSet { rules })
    }

    pub fn to_file_string(&self) -> String {
        self.rules
            .iter()
            .map(|r| format!("{} {}\n", r.pattern, r.direction))
            .collect()
    }

    fn direction_for(&self, token: &str) -> Option<MergeDirection> {
        self.rules
            .iter()
            .find(|r| r.pattern.eq_ignore_ascii_case(token))
            .map(|r| r.direction)
    }
}

/// Digits with optional separators, e.g. `50`, `3.5`, `1,000`, `1\/2`.
pub fn is_numeric(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit())
        && token
            .chars()
            .all(|c| c.is_ascii_digit() || ",.-/\\".contains(c))
}

/// `joins[i]` is true when leaf `i` fuses with leaf `i + 1`.
fn merge_joins(tokens: &[&str], rules: &MergeRuleSet) -> Result<Vec<bool>> {
    let n = tokens.len();
    let mut joins = vec![false; n.saturating_sub(1)];
    for (i, tok) in tokens.iter().enumerate() {
        let Some(dir) = rules.direction_for(tok) else {
            continue;
        };
        let no_neighbor = |side: &str| {
            Error::InvalidInput(format!(
                "merge rule for {tok:?} at {i} has no {side} neighbor"
            ))
        };
        match dir {
            MergeDirection::Left => {
                if i == 0 {
                    return Err(no_neighbor("left"));
                }
                joins[i - 1] = true;
            }
            MergeDirection::Right => {
                if i + 1 >= n {
                    return Err(no_neighbor("right"));
                }
                joins[i] = true;
            }
            MergeDirection::LeftNumeric => {
                if i > 0 && is_numeric(tokens[i - 1]) {
                    joins[i - 1] = true;
                }
            }
            MergeDirection::AdjacentNumeric => {
                if i + 1 < n && is_numeric(tokens[i + 1]) {
                    joins[i] = true;
                } else if i > 0 && is_numeric(tokens[i - 1]) {
                    joins[i - 1] = true;
                }
            }
        }
    }
    Ok(joins)
}

/// Maximal runs `[first, last]` of leaves connected by joins.
fn merge_groups(joins: &[bool]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for (i, &j) in joins.iter().enumerate() {
        if !j {
            if i > start {
                groups.push((start, i));
            }
            start = i + 1;
        }
    }
    if joins.len() > start {
        groups.push((start, joins.len()));
    }
    groups
}

struct Fusion {
    first: usize,
    last: usize,
    token: String,
}

fn rebuild(tree: &ConstTree, fusions: &[Fusion], is_root: bool) -> Option<ConstTree> {
    match tree {
        ConstTree::Leaf { index, .. } => {
            let fused = fusions
                .iter()
                .any(|f| f.first <= *index && *index <= f.last);
            (!fused).then(|| tree.clone())
        }
        ConstTree::Node {
            label,
            span,
            children,
        } => {
            // fusions whose leaves straddle two or more children land here
            let local: Vec<&Fusion> = fusions
                .iter()
                .filter(|f| {
                    span.start <= f.first
                        && f.last <= span.end
                        && !children
                            .iter()
                            .any(|c| c.span().contains(&Span::new(f.first, f.last)))
                })
                .collect();
            let mut kids = Vec::new();
            for c in children {
                if let Some(k) = rebuild(c, fusions, false) {
                    kids.push(k);
                }
                for f in &local {
                    if c.span().contains(&Span::new(f.first, f.first)) {
                        kids.push(ConstTree::leaf(f.token.clone(), f.first));
                    }
                }
            }
            if kids.is_empty() {
                return None;
            }
            if !is_root && span.width() >= 2 && kids.len() == 1 && kids[0].is_leaf() {
                return kids.pop();
            }
            Some(ConstTree::node(label.clone(), kids))
        }
    }
}

/// Re-fuses tokens the treebank split off (`are n't` → `aren't`,
/// `Dow 's` → `Dow's`, `50 %` → `50%`). The fused leaf sits at the lowest
/// common ancestor of the pieces; nodes left empty disappear and non-root
/// nodes reduced from several leaves to one become that leaf.
pub fn merge_presplit(tree: &ConstTree, rules: &MergeRuleSet) -> Result<ConstTree> {
    let leaves = tree.leaves();
    let joins = merge_joins(&leaves, rules)?;
    let fusions: Vec<Fusion> = merge_groups(&joins)
        .into_iter()
        .map(|(first, last)| Fusion {
            first,
            last,
            token: leaves[first..=last].concat(),
        })
        .collect();
    if fusions.is_empty() {
        return Ok(tree.clone());
    }
    let rebuilt = rebuild(tree, &fusions, true).expect("fused leaves keep the tree non-empty");
    Ok(rebuilt.reindexed())
}

/// Replaces every multi-piece word by an `SWC` node over its pieces
/// (end-of-word markers stripped). Existing `SWC` nodes are left alone.
pub fn inject_swc(tree: &ConstTree, model: &BpeModel) -> ConstTree {
    fn go(t: &ConstTree, model: &BpeModel) -> ConstTree {
        match t {
            ConstTree::Leaf { token, index } => {
                let pieces = model.encode(token);
                if pieces.len() <= 1 {
                    return t.clone();
                }
                let leaves = pieces
                    .iter()
                    .map(|p| ConstTree::leaf(strip_marker(p), *index))
                    .collect();
                ConstTree::node(SWC_LABEL, leaves)
            }
            ConstTree::Node {
                label, children, ..
            } => {
                if label == SWC_LABEL {
                    return t.clone();
                }
                ConstTree::node(
                    label.clone(),
                    children.iter().map(|c| go(c, model)).collect(),
                )
            }
        }
    }
    go(tree, model).reindexed()
}

/// Share of `SWC` nodes among the nodes counted as constituents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubwordStats {
    pub swc_nodes: usize,
    pub counted_nodes: usize,
    pub swc_fraction: f64,
}

/// Counts nodes under the default span convention: every internal node
/// except those spanning the whole sentence.
pub fn subword_stats(trees: &[ConstTree]) -> Result<SubwordStats> {
    if trees.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mut swc, mut counted) = (0, 0);
    for t in trees {
        let whole = t.span();
        t.walk(&mut |node| {
            if node.is_leaf() || node.span() == whole {
                return;
            }
            counted += 1;
            if node.label() == SWC_LABEL {
                swc += 1;
            }
        });
    }
    let swc_fraction = if counted == 0 {
        0.0
    } else {
        swc as f64 / counted as f64
    };
    Ok(SubwordStats {
        swc_nodes: swc,
        counted_nodes: counted,
        swc_fraction,
    })
}

/// Full reference-tree pipeline for the subword setting: drop the
/// part-of-speech layer, re-fuse pre-split words, remove punctuation,
/// expand words into `SWC` nodes and relabel the remaining nodes `X`.
/// Casing and digits are left intact.
pub fn preprocess_subword_tree(
    tree: ConstTree,
    rules: &MergeRuleSet,
    model: &BpeModel,
    keep_preterminals: bool,
) -> Result<ConstTree> {
    let tree = if keep_preterminals {
        tree
    } else {
        tree.without_preterminals()
    };
    let merged = merge_presplit(&tree, rules)?;
    let cleaned = remove_punctuation(merged).ok_or(Error::EmptyAfterPreprocessing)?;
    Ok(strip_labels(inject_swc(&cleaned, model)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::bracket::{emit_bracket, parse_bracket};

    fn tree(s: &str) -> ConstTree {
        parse_bracket(s).unwrap().0
    }

    #[test]
    fn contractions_and_possessives() {
        let rules = MergeRuleSet::default();
        let t = tree("(S (NP they) (VP are n't (ADJP new)))");
        assert_eq!(
            emit_bracket(&merge_presplit(&t, &rules).unwrap()),
            "(S (NP they) (VP aren't (ADJP new)))"
        );
        let t = tree("(S (NP (NP Dow 's) drop) (VP fell))");
        assert_eq!(
            emit_bracket(&merge_presplit(&t, &rules).unwrap()),
            "(S (NP Dow's drop) (VP fell))"
        );
        let t = tree("(S (NP the dog) (VP barks))");
        assert_eq!(merge_presplit(&t, &rules).unwrap(), t);
    }

    #[test]
    fn fusion_across_constituents_lands_at_lca() {
        let rules = MergeRuleSet::default();
        let t = tree("(S (NP (NNP Dow)) (VP (POS 's) (NN rise)))");
        assert_eq!(
            emit_bracket(&merge_presplit(&t, &rules).unwrap()),
            "(S Dow's (VP (NN rise)))"
        );
    }

    #[test]
    fn numeric_symbols() {
        let rules = MergeRuleSet::default();
        let t = tree("(S (NP $ 50) (VP rose (NP 5 %)))");
        assert_eq!(
            emit_bracket(&merge_presplit(&t, &rules).unwrap()),
            "(S $50 (VP rose 5%))"
        );
        let t = tree("(S (NP 50 $) (NP the %))");
        assert_eq!(
            emit_bracket(&merge_presplit(&t, &rules).unwrap()),
            "(S 50$ (NP the %))"
        );
    }

    #[test]
    fn missing_neighbor_is_an_error() {
        let rules = MergeRuleSet::default();
        assert!(merge_presplit(&tree("(S n't go)"), &rules).is_err());
        let right = MergeRuleSet::parse("un right\n").unwrap();
        assert!(merge_presplit(&tree("(S go un)"), &right).is_err());
        assert_eq!(
            emit_bracket(&merge_presplit(&tree("(S un go)"), &right).unwrap()),
            "(S ungo)"
        );
    }

    #[test]
    fn rule_file_roundtrip() {
        let rules = MergeRuleSet::default();
        assert_eq!(MergeRuleSet::parse(&rules.to_file_string()).unwrap(), rules);
        let err = MergeRuleSet::parse("# c\nn't sideways\n").unwrap_err();
        match err {
            Error::Parse(p) => assert_eq!((p.line, p.column), (2, 5)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(MergeRuleSet::parse("just-one-field\n").is_err());
    }

    #[test]
    fn case_insensitive_patterns() {
        let t = tree("(S (VP DO N'T))");
        assert_eq!(
            emit_bracket(&merge_presplit(&t, &MergeRuleSet::default()).unwrap()),
            "(S DON'T)"
        );
    }

    #[test]
    fn stats_examples() {
        let t = tree("(X (X a b) (SWC c d) (X e (X f g)) (X h))");
        let s = subword_stats(&[t]).unwrap();
        assert_eq!((s.swc_nodes, s.counted_nodes), (1, 5));
        assert_eq!(s.swc_fraction, 0.2);
        let none = subword_stats(&[tree("(X (X a b) c)")]).unwrap();
        assert_eq!(none.swc_fraction, 0.0);
        let all = subword_stats(&[tree("(X (SWC a b) (SWC c d))")]).unwrap();
        assert_eq!(all.swc_fraction, 1.0);
        assert!(subword_stats(&[]).is_err());
    }
}
