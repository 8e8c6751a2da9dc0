//! Unsupervised syntactic structure induction with a masked language model
//! whose attention is constrained by a distance/height parser network.

#![allow(clippy::needless_range_loop)]

pub mod depfn;
pub mod error;
pub mod eval;
pub mod induction;
pub mod model;
pub mod subword;
pub mod synthetic;
pub mod training;
pub mod treebank;
pub mod trees;

pub use error::{Error, ParseError, Result};
pub use trees::{ConstTree, DepTree, Head, Span, SyntaxProfile, TokenSeq};
