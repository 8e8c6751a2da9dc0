//! Readers and writers for bracket trees and CoNLL tables, PTB-style
//! preprocessing, and the word and subword vocabularies.

pub mod bpe;
pub mod bracket;
pub mod conll;
pub mod preprocess;
pub mod vocab;

pub use bpe::{train_bpe, BpeModel, END_OF_WORD};
pub use bracket::{emit_bracket, parse_bracket, parse_bracket_corpus};
pub use conll::{emit_conll, parse_conll, ConllSentence};
pub use preprocess::{
    is_punctuation, preprocess_ptb, preprocess_ptb_tree, remove_punctuation, strip_labels,
    SWC_LABEL,
};
pub use vocab::{build_word_vocab, Vocab};
