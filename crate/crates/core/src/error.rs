use std::fmt;

use thiserror::Error;

use crate::trees::TreeViolation;

/// A located parse failure in a text input (bracket, CoNLL, vocab or model file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {0}")]
    Parse(ParseError),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: isize, len: usize },

    #[error("invalid tree: {0}")]
    InvalidTree(TreeViolation),

    #[error("non-binary node with {0} children")]
    NonBinary(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty-after-preprocessing")]
    EmptyAfterPreprocessing,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("no-masked-tokens")]
    NoMaskedTokens,

    #[error("undefined-swc-recall: reference tree has no SWC nodes")]
    UndefinedSwcRecall,

    #[error("sentence count mismatch: {left} vs {right}")]
    SentenceCountMismatch { left: usize, right: usize },

    #[error("non-finite training loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("io error: {0}")]
    Io(std::io::Error),

    #[error("json error: {0}")]
    Json(serde_json::Error),
}

// Wrapped errors appear in the message only, not as sources.
macro_rules! wrap {
    ($($ty:ty => $variant:ident),*) => {
        $(impl From<$ty> for Error {
            fn from(e: $ty) -> Self {
                Error::$variant(e)
            }
        })*
    };
}

wrap!(ParseError => Parse, TreeViolation => InvalidTree, std::io::Error => Io, serde_json::Error => Json);

pub type Result<T, E = Error> = std::result::Result<T, E>;
