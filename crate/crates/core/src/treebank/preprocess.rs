//! Word-level PTB normalization: punctuation removal, lowercasing, digit
//! replacement and out-of-vocabulary substitution.

use crate::error::{Error, Result};
use crate::treebank::vocab::{Vocab, UNK};
use crate::trees::{ConstTree, TokenSeq};

/// Treebank symbols that count as punctuation in addition to tokens made
/// only of ASCII punctuation characters.
pub const PTB_PUNCT_SYMBOLS: &[&str] = &[
    "``", "''", "-LRB-", "-RRB-", "-LCB-", "-RCB-", "-LSB-", "-RSB-", "-lrb-", "-rrb-", "-lcb-",
    "-rcb-", "-lsb-", "-rsb-", "--", "...",
];

/// Label kept by [`strip_labels`].
pub const SWC_LABEL: &str = "SWC";
pub const PLACEHOLDER_LABEL: &str = "X";

pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty()
        && (PTB_PUNCT_SYMBOLS.contains(&token) || token.chars().all(|c| c.is_ascii_punctuation()))
}

/// Lowercases and replaces every ASCII digit with `N`.
pub fn normalize_word(token: &str) -> String {
    token
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_ascii_digit() { 'N' } else { c })
        .collect()
}

/// Maps one non-punctuation token to its vocabulary form. A token already
/// present in the vocabulary is taken as normalized, which keeps the `N`
/// digit marker stable under a second pass.
pub fn normalize_in_vocab(token: &str, vocab: &Vocab) -> String {
    if vocab.contains(token) {
        return token.to_string();
    }
    let norm = normalize_word(token);
    if vocab.contains(&norm) {
        norm
    } else {
        UNK.to_string()
    }
}

pub fn preprocess_ptb(tokens: &TokenSeq, vocab: &Vocab) -> Result<TokenSeq> {
    let out: Vec<String> = tokens
        .tokens()
        .iter()
        .filter(|t| !is_punctuation(t))
        .map(|t| normalize_in_vocab(t, vocab))
        .collect();
    if out.is_empty() {
        return Err(Error::EmptyAfterPreprocessing);
    }
    TokenSeq::new(out)
}

/// Relabels every node `X`, keeping `SWC` nodes.
pub fn strip_labels(tree: ConstTree) -> ConstTree {
    tree.map_labels(&|l| {
        if l == SWC_LABEL {
            SWC_LABEL.to_string()
        } else {
            PLACEHOLDER_LABEL.to_string()
        }
    })
}

/// Removes punctuation leaves and renumbers; `None` if nothing remains.
pub fn remove_punctuation(tree: ConstTree) -> Option<ConstTree> {
    tree.retain_leaves(&|t| !is_punctuation(t))
}

/// Applies the word-level pipeline to a reference tree: drop the
/// part-of-speech layer (unless `keep_preterminals`), remove punctuation,
/// normalize tokens against `vocab`, and relabel nodes `X`.
pub fn preprocess_ptb_tree(
    tree: ConstTree,
    vocab: &Vocab,
    keep_preterminals: bool,
) -> Result<ConstTree> {
    let tree = if keep_preterminals {
        tree
    } else {
        tree.without_preterminals()
    };
    let tree = remove_punctuation(tree).ok_or(Error::EmptyAfterPreprocessing)?;
    Ok(strip_labels(
        tree.map_tokens(&|t| normalize_in_vocab(t, vocab)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::bracket::{emit_bracket, parse_bracket};

    fn vocab(words: &[&str]) -> Vocab {
        Vocab::from_words(words.iter().map(|w| w.to_string()))
    }

    #[test]
    fn worked_sentence() {
        let v = vocab(&["are", "n't", "entirely", "new", "for", "p&g"]);
        let raw = TokenSeq::from_words(&[
            "Superconcentrates",
            "are",
            "n't",
            "entirely",
            "new",
            "for",
            "P&G",
            ".",
        ])
        .unwrap();
        let out = preprocess_ptb(&raw, &v).unwrap();
        assert_eq!(
            out.tokens(),
            ["<unk>", "are", "n't", "entirely", "new", "for", "p&g"]
        );
    }

    #[test]
    fn lowercase_and_digits() {
        let v = vocab(&["hello", "NN"]);
        let out = preprocess_ptb(&TokenSeq::from_words(&["Hello"]).unwrap(), &v).unwrap();
        assert_eq!(out.tokens(), ["hello"]);
        let out = preprocess_ptb(&TokenSeq::from_words(&["15", "%"]).unwrap(), &v).unwrap();
        assert_eq!(out.tokens(), ["NN"]);
        assert_eq!(normalize_word("2nd"), "Nnd");
    }

    #[test]
    fn all_punctuation_is_signalled() {
        let v = vocab(&["a"]);
        let err = preprocess_ptb(&TokenSeq::from_words(&[",", "``", "-LRB-"]).unwrap(), &v);
        assert!(matches!(err, Err(Error::EmptyAfterPreprocessing)));
    }

    #[test]
    fn punctuation_table() {
        for p in [
            ".", ",", "''", "``", "-LRB-", "-RRB-", "--", "$", "%", "'", ";", "?",
        ] {
            assert!(is_punctuation(p), "{p}");
        }
        for w in ["p&g", "n't", "'s", "a", "N", "<unk>"] {
            assert!(!is_punctuation(w), "{w}");
        }
    }

    #[test]
    fn preprocess_is_idempotent() {
        let v = vocab(&["the", "NN", "cats", "n't"]);
        let raw = TokenSeq::from_words(&["The", "42", "CATS", ",", "x", "n't"]).unwrap();
        let once = preprocess_ptb(&raw, &v).unwrap();
        let twice = preprocess_ptb(&once, &v).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.tokens(), ["the", "NN", "cats", "<unk>", "n't"]);
    }

    #[test]
    fn strip_labels_cases() {
        let (t, _) = parse_bracket("(S (NP a b) (VP c))").unwrap();
        let s = strip_labels(t);
        assert_eq!(emit_bracket(&s), "(X (X a b) (X c))");
        assert_eq!(strip_labels(s.clone()), s);
        let (t, _) = parse_bracket("(S (SWC Su per) (VP c))").unwrap();
        assert_eq!(emit_bracket(&strip_labels(t)), "(X (SWC Su per) (X c))");
    }

    #[test]
    fn reference_tree_pipeline() {
        let src = "(S (NP-SBJ (NNS Superconcentrates)) (VP (VBP are) (RB n't) \
                   (ADJP (RB entirely) (JJ new)) (PP (IN for) (NP (NNP P&G)))) (. .))";
        let (t, _) = parse_bracket(src).unwrap();
        let v = vocab(&["are", "n't", "entirely", "new", "for", "p&g"]);
        let out = preprocess_ptb_tree(t, &v, false).unwrap();
        assert_eq!(
            emit_bracket(&out),
            "(X (X <unk>) (X are n't (X entirely new) (X for (X p&g))))"
        );
    }
}
