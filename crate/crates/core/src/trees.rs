//! Tree data types shared by every other module.
//!
//! Token indices are 0-based. Constituency leaves are bare tokens; every
//! bracketed node, including unary nodes over a single token, is a
//! [`ConstTree::Node`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// A tokenized sentence, optionally aligned to source words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    tokens: Vec<String>,
    word_ids: Option<Vec<usize>>,
}

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        Self::with_word_ids(tokens, None)
    }

    pub fn with_word_ids(tokens: Vec<String>, word_ids: Option<Vec<usize>>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("token sequence is empty".into()));
        }
        if let Some(pos) = tokens.iter().position(|t| t.is_empty()) {
            return Err(Error::InvalidInput(format!(
                "empty token at position {pos}"
            )));
        }
        if let Some(ids) = &word_ids {
            if ids.len() != tokens.len() {
                return Err(Error::LengthMismatch {
                    expected: tokens.len(),
                    found: ids.len(),
                });
            }
            if ids[0] != 0 || ids.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
                return Err(Error::InvalidInput(
                    "word ids must start at 0 and grow in steps of 0 or 1".into(),
                ));
            }
        }
        Ok(TokenSeq { tokens, word_ids })
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        Self::new(words.iter().map(|w| w.as_ref().to_string()).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn word_ids(&self) -> Option<&[usize]> {
        self.word_ids.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

/// Inclusive token interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn width(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

/// Ordered constituency tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstTree {
    Leaf {
        token: String,
        index: usize,
    },
    Node {
        label: String,
        span: Span,
        children: Vec<ConstTree>,
    },
}

impl ConstTree {
    pub fn leaf(token: impl Into<String>, index: usize) -> Self {
        ConstTree::Leaf {
            token: token.into(),
            index,
        }
    }

    /// Builds a node whose span covers its children. Panics on an empty child list.
    pub fn node(label: impl Into<String>, children: Vec<ConstTree>) -> Self {
        let start = children
            .first()
            .expect("node needs at least one child")
            .span()
            .start;
        let end = children.last().unwrap().span().end;
        ConstTree::Node {
            label: label.into(),
            span: Span::new(start, end),
            children,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            ConstTree::Leaf { index, .. } => Span::new(*index, *index),
            ConstTree::Node { span, .. } => *span,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, ConstTree::Leaf { .. })
    }

    /// Node label, or the token text for a leaf.
    pub fn label(&self) -> &str {
        match self {
            ConstTree::Leaf { token, .. } => token,
            ConstTree::Node { label, .. } => label,
        }
    }

    pub fn children(&self) -> &[ConstTree] {
        match self {
            ConstTree::Leaf { .. } => &[],
            ConstTree::Node { children, .. } => children,
        }
    }

    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ConstTree::Leaf { token, .. } => out.push(token),
            ConstTree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            ConstTree::Leaf { .. } => 1,
            ConstTree::Node { children, .. } => children.iter().map(|c| c.num_leaves()).sum(),
        }
    }

    /// Number of non-leaf nodes.
    pub fn num_nodes(&self) -> usize {
        match self {
            ConstTree::Leaf { .. } => 0,
            ConstTree::Node { children, .. } => {
                1 + children.iter().map(|c| c.num_nodes()).sum::<usize>()
            }
        }
    }

    pub fn token_seq(&self) -> Result<TokenSeq> {
        TokenSeq::new(self.leaves().into_iter().map(str::to_string).collect())
    }

    /// Pre-order visit of every node (leaves included).
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ConstTree)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Renumbers leaves 0..n in order and recomputes every span.
    pub fn reindexed(self) -> ConstTree {
        let mut next = 0;
        self.reindex_from(&mut next)
    }

    fn reindex_from(self, next: &mut usize) -> ConstTree {
        match self {
            ConstTree::Leaf { token, .. } => {
                let t = ConstTree::leaf(token, *next);
                *next += 1;
                t
            }
            ConstTree::Node {
                label, children, ..
            } => {
                let children = children.into_iter().map(|c| c.reindex_from(next)).collect();
                ConstTree::node(label, children)
            }
        }
    }

    /// Same bracketing and tokens, ignoring node labels.
    pub fn same_shape(&self, other: &ConstTree) -> bool {
        match (self, other) {
            (ConstTree::Leaf { token: a, index: i }, ConstTree::Leaf { token: b, index: j }) => {
                a == b && i == j
            }
            (
                ConstTree::Node {
                    span: s1,
                    children: c1,
                    ..
                },
                ConstTree::Node {
                    span: s2,
                    children: c2,
                    ..
                },
            ) => {
                s1 == s2 && c1.len() == c2.len() && c1.iter().zip(c2).all(|(a, b)| a.same_shape(b))
            }
            _ => false,
        }
    }

    /// Applies `f` to every node label, leaving leaves untouched.
    pub fn map_labels(self, f: &impl Fn(&str) -> String) -> ConstTree {
        match self {
            leaf @ ConstTree::Leaf { .. } => leaf,
            ConstTree::Node {
                label,
                span,
                children,
            } => ConstTree::Node {
                label: f(&label),
                span,
                children: children.into_iter().map(|c| c.map_labels(f)).collect(),
            },
        }
    }

    /// Applies `f` to every leaf token.
    pub fn map_tokens(self, f: &impl Fn(&str) -> String) -> ConstTree {
        match self {
            ConstTree::Leaf { token, index } => ConstTree::Leaf {
                token: f(&token),
                index,
            },
            ConstTree::Node {
                label,
                span,
                children,
            } => ConstTree::Node {
                label,
                span,
                children: children.into_iter().map(|c| c.map_tokens(f)).collect(),
            },
        }
    }

    /// Removes every leaf rejected by `keep`, dropping nodes left without
    /// children, and renumbers. Returns `None` when no leaf survives.
    pub fn retain_leaves(self, keep: &impl Fn(&str) -> bool) -> Option<ConstTree> {
        self.retain_inner(keep).map(ConstTree::reindexed)
    }

    fn retain_inner(self, keep: &impl Fn(&str) -> bool) -> Option<ConstTree> {
        match self {
            ConstTree::Leaf { ref token, .. } => keep(token).then_some(self),
            ConstTree::Node {
                label, children, ..
            } => {
                let children: Vec<_> = children
                    .into_iter()
                    .filter_map(|c| c.retain_inner(keep))
                    .collect();
                (!children.is_empty()).then(|| ConstTree::node(label, children))
            }
        }
    }

    /// Replaces each node whose only child is a leaf by that leaf
    /// (removes a part-of-speech layer).
    pub fn without_preterminals(self) -> ConstTree {
        match self {
            ConstTree::Node {
                label,
                span,
                mut children,
            } => {
                if children.len() == 1 && children[0].is_leaf() {
                    return children.pop().unwrap();
                }
                ConstTree::Node {
                    label,
                    span,
                    children: children
                        .into_iter()
                        .map(|c| c.without_preterminals())
                        .collect(),
                }
            }
            leaf => leaf,
        }
    }
}

/// First invariant a constituency tree violates.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeViolation {
    #[error("leaf count {found} does not match sentence length {expected}")]
    LeafCount { expected: usize, found: usize },
    #[error("leaf index {found} found where {expected} was expected")]
    LeafOrder { expected: usize, found: usize },
    #[error("node {span} has no children")]
    EmptyNode { span: Span },
    #[error("crossing/overlapping spans under node {span}")]
    CrossingSpans { span: Span },
    #[error("node span {stated} does not match its children's extent {actual}")]
    SpanMismatch { stated: Span, actual: Span },
    #[error("empty leaf token at index {index}")]
    EmptyToken { index: usize },
    #[error("dependency tree is empty")]
    EmptyDepTree,
    #[error("no root")]
    NoRoot,
    #[error("multiple roots: {count}")]
    MultipleRoots { count: usize },
    #[error("head {head} of token {token} out of range")]
    HeadOutOfRange { token: usize, head: usize },
    #[error("token {token} heads itself")]
    SelfLoop { token: usize },
    #[error("cycle through token {token}")]
    Cycle { token: usize },
    #[error("label count {found} does not match token count {expected}")]
    LabelCount { expected: usize, found: usize },
}

/// Checks the structural invariants of `tree` against sentence length `n`.
pub fn validate_const_tree(tree: &ConstTree, n: usize) -> Result<(), TreeViolation> {
    let mut next = 0usize;
    check_node(tree, &mut next)?;
    if next != n {
        return Err(TreeViolation::LeafCount {
            expected: n,
            found: next,
        });
    }
    Ok(())
}

fn check_node(tree: &ConstTree, next: &mut usize) -> Result<(), TreeViolation> {
    match tree {
        ConstTree::Leaf { token, index } => {
            if *index != *next {
                return Err(TreeViolation::LeafOrder {
                    expected: *next,
                    found: *index,
                });
            }
            if token.is_empty() {
                return Err(TreeViolation::EmptyToken { index: *index });
            }
            *next += 1;
            Ok(())
        }
        ConstTree::Node { span, children, .. } => {
            if children.is_empty() {
                return Err(TreeViolation::EmptyNode { span: *span });
            }
            for pair in children.windows(2) {
                if pair[0].span().end + 1 != pair[1].span().start {
                    return Err(TreeViolation::CrossingSpans { span: *span });
                }
            }
            let start = *next;
            for c in children {
                check_node(c, next)?;
            }
            let actual = Span::new(start, *next - 1);
            if actual != *span {
                return Err(TreeViolation::SpanMismatch {
                    stated: *span,
                    actual,
                });
            }
            Ok(())
        }
    }
}

/// Longest root-to-leaf path, in edges.
pub fn tree_depth(tree: &ConstTree) -> usize {
    match tree {
        ConstTree::Leaf { .. } => 0,
        ConstTree::Node { children, .. } => 1 + children.iter().map(tree_depth).max().unwrap_or(0),
    }
}

/// Head of a token: another token or the distinguished root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Head {
    Root,
    Token(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepTree {
    pub heads: Vec<Head>,
    pub labels: Option<Vec<String>>,
}

impl DepTree {
    pub fn new(heads: Vec<Head>) -> Self {
        DepTree {
            heads,
            labels: None,
        }
    }

    /// From `Option`s, with `None` as root.
    pub fn from_options(heads: &[Option<usize>]) -> Self {
        DepTree::new(
            heads
                .iter()
                .map(|h| h.map_or(Head::Root, Head::Token))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn root(&self) -> Option<usize> {
        self.heads.iter().position(|h| *h == Head::Root)
    }

    /// Children lists indexed by head token.
    pub fn dependents(&self) -> Vec<Vec<usize>> {
        let mut deps = vec![Vec::new(); self.heads.len()];
        for (i, h) in self.heads.iter().enumerate() {
            if let Head::Token(j) = h {
                if *j < deps.len() {
                    deps[*j].push(i);
                }
            }
        }
        deps
    }
}

/// Ok iff there is exactly one root, every head is in range and every
/// token reaches the root.
pub fn validate_dep_tree(tree: &DepTree) -> Result<(), TreeViolation> {
    let n = tree.heads.len();
    if n == 0 {
        return Err(TreeViolation::EmptyDepTree);
    }
    if let Some(labels) = &tree.labels {
        if labels.len() != n {
            return Err(TreeViolation::LabelCount {
                expected: n,
                found: labels.len(),
            });
        }
    }
    let roots = tree.heads.iter().filter(|h| **h == Head::Root).count();
    for (i, h) in tree.heads.iter().enumerate() {
        if let Head::Token(j) = *h {
            if j >= n {
                return Err(TreeViolation::HeadOutOfRange { token: i, head: j });
            }
            if j == i {
                return Err(TreeViolation::SelfLoop { token: i });
            }
        }
    }
    match roots {
        0 => return Err(TreeViolation::NoRoot),
        1 => {}
        count => return Err(TreeViolation::MultipleRoots { count }),
    }
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            match state[cur] {
                2 => break,
                1 => return Err(TreeViolation::Cycle { token: cur }),
                _ => {}
            }
            state[cur] = 1;
            path.push(cur);
            match tree.heads[cur] {
                Head::Root => break,
                Head::Token(j) => cur = j,
            }
        }
        for p in path {
            state[p] = 2;
        }
    }
    Ok(())
}

/// Syntactic distances (one per adjacent token pair) and heights (one per token).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntaxProfile {
    pub distances: Vec<f64>,
    pub heights: Vec<f64>,
}

impl SyntaxProfile {
    pub fn new(distances: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if heights.is_empty() {
            return Err(Error::InvalidInput(
                "profile needs at least one height".into(),
            ));
        }
        if distances.len() + 1 != heights.len() {
            return Err(Error::LengthMismatch {
                expected: heights.len() - 1,
                found: distances.len(),
            });
        }
        if !distances.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("distances"));
        }
        if !heights.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("heights"));
        }
        Ok(SyntaxProfile { distances, heights })
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }
}
