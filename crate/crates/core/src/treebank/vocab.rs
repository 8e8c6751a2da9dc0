use std::collections::HashMap;

use crate::error::{Error, ParseError, Result};

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";
pub const MASK: &str = "<mask>";
/// Reserved tokens, in id order.
pub const RESERVED: [&str; 3] = [UNK, PAD, MASK];

/// Dense bidirectional token/id map with the reserved tokens at ids 0..3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    /// Reserved tokens followed by `words` (duplicates and reserved entries skipped).
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for r in RESERVED {
            v.push(r.to_string());
        }
        for w in words {
            v.push(w);
        }
        v
    }

    fn push(&mut self, token: String) {
        if !self.ids.contains_key(&token) {
            self.ids.insert(token.clone(), self.tokens.len() as u32);
            self.tokens.push(token);
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// Id of `token`, or of `<unk>`.
    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or_else(|| self.unk_id())
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn unk_id(&self) -> u32 {
        0
    }

    pub fn pad_id(&self) -> u32 {
        1
    }

    pub fn mask_id(&self) -> u32 {
        2
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Vec<u32> {
        words.iter().map(|w| self.id_or_unk(w.as_ref())).collect()
    }

    /// One token per line; line number is the id.
    pub fn to_file_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_file_str(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        for (i, r) in RESERVED.iter().enumerate() {
            if lines.get(i) != Some(r) {
                return Err(ParseError::new(
                    i + 1,
                    1,
                    format!("expected reserved token {r} on line {}", i + 1),
                )
                .into());
            }
        }
        let mut v = Vocab {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for (i, line) in lines.iter().enumerate() {
            if line.is_empty() || v.contains(line) {
                return Err(
                    ParseError::new(i + 1, 1, "empty or duplicate vocabulary entry").into(),
                );
            }
            v.push(line.to_string());
        }
        Ok(v)
    }
}

/// Keeps the `size - 3` most frequent tokens (ties broken lexicographically)
/// after the reserved ones.
pub fn build_word_vocab<'a>(
    corpus: impl IntoIterator<Item = &'a str>,
    size: usize,
) -> Result<Vocab> {
    if size < RESERVED.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "vocabulary size {size} leaves no room for words"
        )));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tok in corpus {
        if !RESERVED.contains(&tok) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(size - RESERVED.len());
    Ok(Vocab::from_words(
        ranked.into_iter().map(|(w, _)| w.to_string()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_corpus() {
        let v = build_word_vocab("a a b".split_whitespace(), 5).unwrap();
        assert_eq!(v.tokens(), ["<unk>", "<pad>", "<mask>", "a", "b"]);
        assert_eq!(v.id("b"), Some(4));
        assert_eq!(v.id_or_unk("zzz"), v.unk_id());
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_word_vocab("c b a c b a".split_whitespace(), 5).unwrap();
        assert_eq!(v.tokens(), ["<unk>", "<pad>", "<mask>", "a", "b"]);
    }

    #[test]
    fn ptb_scale_size() {
        let words: Vec<String> = (0..12_000).map(|i| format!("w{i}")).collect();
        let v = build_word_vocab(words.iter().map(String::as_str), 10_001).unwrap();
        assert_eq!(v.len(), 10_001);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_word_vocab(std::iter::empty(), 10),
            Err(Error::EmptyCorpus)
        ));
        assert!(build_word_vocab("a".split_whitespace(), 3).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let v = build_word_vocab("x y y z".split_whitespace(), 10).unwrap();
        let text = v.to_file_string();
        assert!(text.starts_with("<unk>\n<pad>\n<mask>\ny\n"));
        assert_eq!(Vocab::from_file_str(&text).unwrap(), v);
        assert!(Vocab::from_file_str("a\nb\n").is_err());
    }
}
