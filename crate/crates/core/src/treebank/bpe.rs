//! Byte-pair encoding over characters.
//!
//! Merge statistics are collected inside words only. The end-of-word marker
//! is attached to the final piece by [`BpeModel::encode`] and never takes part
//! in a merge.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, ParseError, Result};

pub const END_OF_WORD: &str = "</w>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    base_size: usize,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
}

impl BpeModel {
    pub fn new(base_size: usize, merges: Vec<(String, String)>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, m) in merges.iter().enumerate() {
            if ranks.insert(m.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate merge {} {}",
                    m.0, m.1
                )));
            }
        }
        Ok(BpeModel {
            base_size,
            merges,
            ranks,
        })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    /// Base characters plus distinct merged symbols.
    pub fn inventory_size(&self) -> usize {
        let merged: HashSet<String> = self.merges.iter().map(|(a, b)| format!("{a}{b}")).collect();
        self.base_size + merged.len()
    }

    /// Splits `word` into pieces; the last piece carries [`END_OF_WORD`].
    pub fn encode(&self, word: &str) -> Vec<String> {
        let mut pieces = self.segment(word);
        if let Some(last) = pieces.last_mut() {
            last.push_str(END_OF_WORD);
        }
        pieces
    }

    /// Pieces without the end-of-word marker.
    pub fn segment(&self, word: &str) -> Vec<String> {
        let mut syms: Vec<String> = word.chars().map(String::from).collect();
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (a, b) = &self.merges[rank];
            syms = merge_pair(&syms, a, b);
        }
        syms
    }

    /// Header line with the base inventory size, then `left right` per merge.
    pub fn to_file_string(&self) -> String {
        let mut s = format!("{}\n", self.base_size);
        for (a, b) in &self.merges {
            s.push_str(a);
            s.push(' ');
            s.push_str(b);
            s.push('\n');
        }
        s
    }

    pub fn from_file_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let base_size = match lines.next() {
            Some((_, l)) => l
                .trim()
                .parse()
                .map_err(|_| ParseError::new(1, 1, "header must be the base inventory size"))?,
            None => return Err(ParseError::new(1, 1, "empty model file").into()),
        };
        let mut merges = Vec::new();
        for (i, line) in lines {
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() != 2 || parts[0].is_empty() || parts[1].is_empty() {
                return Err(ParseError::new(i + 1, 1, "expected \"left right\"").into());
            }
            merges.push((parts[0].to_string(), parts[1].to_string()));
        }
        BpeModel::new(base_size, merges)
    }
}

/// Strips the end-of-word marker from a piece.
pub fn strip_marker(piece: &str) -> &str {
    piece.strip_suffix(END_OF_WORD).unwrap_or(piece)
}

fn merge_pair(syms: &[String], a: &str, b: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
            out.push(format!("{a}{b}"));
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

type Pair = (String, String);

struct PairStats {
    counts: HashMap<Pair, i64>,
    ordered: BTreeSet<(Reverse<i64>, String, String)>,
    occurs_in: HashMap<Pair, HashSet<usize>>,
}

impl PairStats {
    fn add(&mut self, pair: &Pair, delta: i64, word: usize) {
        let c = self.counts.entry(pair.clone()).or_insert(0);
        if *c > 0 {
            self.ordered
                .remove(&(Reverse(*c), pair.0.clone(), pair.1.clone()));
        }
        *c += delta;
        if *c > 0 {
            self.ordered
                .insert((Reverse(*c), pair.0.clone(), pair.1.clone()));
        }
        if delta > 0 {
            self.occurs_in.entry(pair.clone()).or_default().insert(word);
        }
    }

    fn best(&self) -> Option<Pair> {
        self.ordered
            .iter()
            .next()
            .map(|(_, a, b)| (a.clone(), b.clone()))
    }
}

/// Learns merges until the symbol inventory reaches `target_size` or no
/// adjacent pair remains. Highest pair frequency wins; ties go to the
/// lexicographically smallest pair.
pub fn train_bpe<'a>(
    corpus: impl IntoIterator<Item = &'a str>,
    target_size: usize,
) -> Result<BpeModel> {
    let mut freq: HashMap<&str, i64> = HashMap::new();
    for w in corpus {
        if !w.is_empty() {
            *freq.entry(w).or_default() += 1;
        }
    }
    if freq.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut vocab: Vec<(&str, i64)> = freq.into_iter().collect();
    vocab.sort();
    let mut words: Vec<(Vec<String>, i64)> = vocab
        .iter()
        .map(|(w, c)| (w.chars().map(String::from).collect(), *c))
        .collect();
    let mut inventory: HashSet<String> =
        words.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    let base_size = inventory.len();
    if target_size < base_size {
        return Err(Error::InvalidInput(format!(
            "target size {target_size} is smaller than the base character inventory {base_size}"
        )));
    }

    let mut stats = PairStats {
        counts: HashMap::new(),
        ordered: BTreeSet::new(),
        occurs_in: HashMap::new(),
    };
    for (idx, (syms, c)) in words.iter().enumerate() {
        for w in syms.windows(2) {
            stats.add(&(w[0].clone(), w[1].clone()), *c, idx);
        }
    }

    let mut merges = Vec::new();
    while inventory.len() < target_size {
        let Some(pair) = stats.best() else { break };
        let mut affected: Vec<usize> = stats
            .occurs_in
            .get(&pair)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        for idx in affected {
            let (syms, c) = &words[idx];
            let c = *c;
            let merged = merge_pair(syms, &pair.0, &pair.1);
            if merged.len() == syms.len() {
                continue;
            }
            for w in syms.windows(2) {
                stats.add(&(w[0].clone(), w[1].clone()), -c, idx);
            }
            for w in merged.windows(2) {
                stats.add(&(w[0].clone(), w[1].clone()), c, idx);
            }
            words[idx].0 = merged;
        }
        inventory.insert(format!("{}{}", pair.0, pair.1));
        merges.push(pair);
    }
    BpeModel::new(base_size, merges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn join(pieces: &[String]) -> String {
        let mut s: String = pieces.concat();
        if let Some(stripped) = s.strip_suffix(END_OF_WORD) {
            s = stripped.to_string();
        }
        s
    }

    #[test]
    fn single_merge_by_hand() {
        let m = train_bpe("aa aa aa".split(' '), 2).unwrap();
        assert_eq!(m.merges(), [("a".to_string(), "a".to_string())]);
        assert_eq!(m.encode("aa"), vec!["aa</w>".to_string()]);
    }

    #[test]
    fn zero_merges_at_base_size() {
        let m = train_bpe("abc cab".split(' '), 3).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.encode("cab"), vec!["c", "a", "b</w>"]);
    }

    #[test]
    fn ties_take_smallest_pair() {
        // (a,b) and (c,d) both occur twice
        let m = train_bpe("ab ab cd cd".split(' '), 5).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn target_below_base_is_error() {
        assert!(train_bpe("abc".split(' '), 2).is_err());
        assert!(matches!(
            train_bpe(std::iter::empty(), 2),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn whole_word_is_one_piece() {
        let m = train_bpe("hello hello world".split(' '), 100).unwrap();
        assert_eq!(m.encode("hello"), vec!["hello</w>"]);
        assert!(m.inventory_size() <= 100);
        assert!(m.encode("").is_empty());
    }

    #[test]
    fn unknown_characters_fall_back() {
        let m = train_bpe("ab ab".split(' '), 3).unwrap();
        let p = m.encode("abz");
        assert_eq!(p, vec!["ab", "z</w>"]);
        assert_eq!(join(&p), "abz");
    }

    #[test]
    fn rare_word_splits_into_five_pieces() {
        let mut corpus = Vec::new();
        for (w, c) in [("Su", 5), ("per", 6), ("con", 7), ("cent", 8), ("rates", 9)] {
            corpus.extend(std::iter::repeat_n(w, c));
        }
        let m = train_bpe(corpus.iter().copied(), 1000).unwrap();
        let pieces = m.encode("Superconcentrates");
        assert_eq!(join(&pieces), "Superconcentrates");
        assert_eq!(pieces.len(), 5, "{pieces:?}");
    }

    #[test]
    fn model_file_roundtrip() {
        let m = train_bpe("low lower lowest newer".split(' '), 20).unwrap();
        let back = BpeModel::from_file_str(&m.to_file_string()).unwrap();
        assert_eq!(back, m);
        for w in ["lowest", "newest", "x"] {
            assert_eq!(back.encode(w), m.encode(w));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let text = "the quick brown fox jumps over the lazy dog the end";
        let a = train_bpe(text.split(' '), 40).unwrap();
        let b = train_bpe(text.split(' '), 40).unwrap();
        assert_eq!(a, b);
    }
}
