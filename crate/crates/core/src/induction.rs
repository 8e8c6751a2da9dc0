//! Deterministic tree construction from syntactic distances and heights,
//! plus the inverse maps used to derive distances/heights from trees.

use crate::error::{Error, Result};
use crate::treebank::preprocess::PLACEHOLDER_LABEL;
use crate::trees::{validate_dep_tree, ConstTree, DepTree, Head, TokenSeq};

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().any(|v| v.is_nan() || v.is_infinite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Binary constituency tree by recursive splitting at the largest distance.
/// `distances[k]` sits between tokens `k` and `k + 1`; ties go to the
/// leftmost maximum. Internal nodes are labeled `X`.
pub fn distances_to_tree(tokens: &TokenSeq, distances: &[f64]) -> Result<ConstTree> {
    let n = tokens.len();
    if distances.len() + 1 != n {
        return Err(Error::LengthMismatch {
            expected: n - 1,
            found: distances.len(),
        });
    }
    check_finite(distances, "distances")?;
    Ok(build_constituent(tokens.tokens(), distances, 0, n - 1))
}

fn build_constituent(tokens: &[String], d: &[f64], lo: usize, hi: usize) -> ConstTree {
    if lo == hi {
        return ConstTree::leaf(tokens[lo].clone(), lo);
    }
    let mut split = lo;
    for k in lo + 1..hi {
        if d[k] > d[split] {
            split = k;
        }
    }
    let left = build_constituent(tokens, d, lo, split);
    let right = build_constituent(tokens, d, split + 1, hi);
    ConstTree::node(PLACEHOLDER_LABEL, vec![left, right])
}

/// Dependency tree from heights over a binary constituency tree. At each
/// node the two sub-parents compete; the left one wins only with a strictly
/// larger height, otherwise the right one becomes the head.
pub fn heights_and_tree_to_dep(heights: &[f64], tree: &ConstTree) -> Result<DepTree> {
    let n = tree.num_leaves();
    if heights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: heights.len(),
        });
    }
    check_finite(heights, "heights")?;
    crate::trees::validate_const_tree(tree, n)?;
    let mut heads = vec![Head::Root; n];
    let root = attach(heights, tree, &mut heads)?;
    heads[root] = Head::Root;
    Ok(DepTree::new(heads))
}

fn attach(h: &[f64], tree: &ConstTree, heads: &mut [Head]) -> Result<usize> {
    match tree {
        ConstTree::Leaf { index, .. } => Ok(*index),
        ConstTree::Node { children, .. } => {
            if children.len() != 2 {
                return Err(Error::NonBinary(children.len()));
            }
            let pl = attach(h, &children[0], heads)?;
            let pr = attach(h, &children[1], heads)?;
            if h[pl] > h[pr] {
                heads[pr] = Head::Token(pl);
                Ok(pl)
            } else {
                heads[pl] = Head::Token(pr);
                Ok(pr)
            }
        }
    }
}

/// Height (longest edge path down to a leaf) of the lowest common ancestor
/// of each adjacent leaf pair.
pub fn tree_to_distances(tree: &ConstTree) -> Vec<f64> {
    let n = tree.num_leaves();
    let mut d = vec![0.0; n.saturating_sub(1)];
    node_height(tree, &mut d);
    d
}

fn node_height(tree: &ConstTree, d: &mut [f64]) -> usize {
    match tree {
        ConstTree::Leaf { .. } => 0,
        ConstTree::Node { children, .. } => {
            let h = 1 + children
                .iter()
                .map(|c| node_height(c, d))
                .max()
                .unwrap_or(0);
            for c in &children[..children.len().saturating_sub(1)] {
                d[c.span().end] = h as f64;
            }
            h
        }
    }
}

/// Longest downward path (in edges) from each token in the dependency tree.
pub fn dep_tree_to_heights(tree: &DepTree) -> Result<Vec<f64>> {
    validate_dep_tree(tree)?;
    let deps = tree.dependents();
    let mut height = vec![0usize; tree.len()];
    // post-order from the root without recursion
    let root = tree.root().expect("validated tree has a root");
    let mut order = Vec::with_capacity(tree.len());
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(&deps[v]);
    }
    for &v in order.iter().rev() {
        height[v] = deps[v].iter().map(|&c| height[c] + 1).max().unwrap_or(0);
    }
    Ok(height.into_iter().map(|h| h as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::bracket::{emit_bracket, parse_bracket};

    fn seq(words: &str) -> TokenSeq {
        TokenSeq::from_words(&words.split(' ').collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn alg1_examples() {
        let s = seq("a b c d");
        let t = distances_to_tree(&s, &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(emit_bracket(&t), "(X a (X b (X c d)))");
        let t = distances_to_tree(&s, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(emit_bracket(&t), "(X (X (X a b) c) d)");
        let t = distances_to_tree(&s, &[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(emit_bracket(&t), "(X (X a b) (X c d))");
    }

    #[test]
    fn alg1_single_token_and_errors() {
        let t = distances_to_tree(&seq("w"), &[]).unwrap();
        assert_eq!(t, ConstTree::leaf("w", 0));
        assert!(matches!(
            distances_to_tree(&seq("a b"), &[]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            distances_to_tree(&seq("a b"), &[f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn alg1_ties_split_leftmost() {
        let t = distances_to_tree(&seq("a b c"), &[1.0, 1.0]).unwrap();
        assert_eq!(emit_bracket(&t), "(X a (X b c))");
    }

    #[test]
    fn alg2_examples() {
        let t = ConstTree::leaf("a", 0);
        assert_eq!(
            heights_and_tree_to_dep(&[0.3], &t).unwrap().heads,
            vec![Head::Root]
        );

        let (t, _) = parse_bracket("(X a b)").unwrap();
        let d = heights_and_tree_to_dep(&[2.0, 1.0], &t).unwrap();
        assert_eq!(d.heads, vec![Head::Root, Head::Token(0)]);

        let (t, _) = parse_bracket("(X a (X b c))").unwrap();
        let d = heights_and_tree_to_dep(&[1.0, 3.0, 2.0], &t).unwrap();
        assert_eq!(d.heads, vec![Head::Token(1), Head::Root, Head::Token(1)]);
    }

    #[test]
    fn alg2_equal_heights_pick_right() {
        let (t, _) = parse_bracket("(X a b)").unwrap();
        let d = heights_and_tree_to_dep(&[1.0, 1.0], &t).unwrap();
        assert_eq!(d.heads, vec![Head::Token(1), Head::Root]);
    }

    #[test]
    fn alg2_rejects_non_binary() {
        let (t, _) = parse_bracket("(X a b c)").unwrap();
        assert!(matches!(
            heights_and_tree_to_dep(&[1.0, 2.0, 3.0], &t),
            Err(Error::NonBinary(3))
        ));
        let (t, _) = parse_bracket("(X a b)").unwrap();
        assert!(heights_and_tree_to_dep(&[1.0], &t).is_err());
    }

    #[test]
    fn lca_heights() {
        let (t, _) = parse_bracket("(X a (X b (X c d)))").unwrap();
        assert_eq!(tree_to_distances(&t), vec![3.0, 2.0, 1.0]);
        let (t, _) = parse_bracket("(X (X a b) (X c d))").unwrap();
        assert_eq!(tree_to_distances(&t), vec![1.0, 2.0, 1.0]);
        assert!(tree_to_distances(&ConstTree::leaf("a", 0)).is_empty());
        // n-ary: all boundaries under the root share its height
        let (t, _) = parse_bracket("(X a b (X c d))").unwrap();
        assert_eq!(tree_to_distances(&t), vec![2.0, 2.0, 1.0]);
    }

    #[test]
    fn dep_heights() {
        let h =
            |heads: &[Option<usize>]| dep_tree_to_heights(&DepTree::from_options(heads)).unwrap();
        assert_eq!(h(&[None]), vec![0.0]);
        assert_eq!(h(&[None, Some(0), Some(1)]), vec![2.0, 1.0, 0.0]);
        assert_eq!(h(&[None, Some(0), Some(0)]), vec![1.0, 0.0, 0.0]);
        assert!(dep_tree_to_heights(&DepTree::from_options(&[Some(1), Some(0)])).is_err());
    }

    #[test]
    fn worked_example_profile_reproduces_induced_trees() {
        let s = seq("<unk> are n't entirely new for p&g");
        let d = [6.0, 3.0, 1.0, 2.0, 4.0, 5.0];
        let t = distances_to_tree(&s, &d).unwrap();
        assert_eq!(
            emit_bracket(&t),
            "(X <unk> (X (X (X are (X (X n't entirely) new)) for) p&g))"
        );
        let h = [1.0, 5.0, 3.0, 2.0, 4.0, 1.5, 6.0];
        let dep = heights_and_tree_to_dep(&h, &t).unwrap();
        assert_eq!(
            dep,
            DepTree::from_options(&[Some(6), Some(6), Some(4), Some(2), Some(1), Some(1), None])
        );
    }
}
