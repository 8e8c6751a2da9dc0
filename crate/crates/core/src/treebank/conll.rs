//! CoNLL dependency tables: `ID  Word  Lemma  POS  Head  DepRel`, tab separated,
//! blank line between sentences. Heads are 1-based on disk with 0 for the root.
//! Ten-column CoNLL-X/U rows are also read (HEAD and DEPREL in columns 7 and 8).

use crate::error::{ParseError, Result};
use crate::trees::{DepTree, Head, TokenSeq};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllSentence {
    pub tokens: TokenSeq,
    pub tree: DepTree,
    /// `None` where the column holds `_`.
    pub lemmas: Vec<Option<String>>,
    pub pos: Vec<Option<String>>,
}

impl ConllSentence {
    pub fn new(tokens: TokenSeq, tree: DepTree) -> Self {
        let n = tokens.len();
        ConllSentence {
            tokens,
            tree,
            lemmas: vec![None; n],
            pos: vec![None; n],
        }
    }
}

fn opt_col(s: &str) -> Option<String> {
    (s != "_").then(|| s.to_string())
}

fn split_row(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

struct Row {
    line: usize,
    id: usize,
    word: String,
    lemma: Option<String>,
    pos: Option<String>,
    head: usize,
    rel: String,
}

fn parse_row(line_no: usize, line: &str) -> Result<Option<Row>, ParseError> {
    let cols = split_row(line);
    let (head_col, rel_col) = match cols.len() {
        6 => (4, 5),
        10 => (6, 7),
        k => {
            return Err(ParseError::new(
                line_no,
                1,
                format!("expected 6 (or 10) columns, found {k}"),
            ))
        }
    };
    // CoNLL-U multiword ranges and empty nodes carry no head of their own
    if cols[0].contains('-') || cols[0].contains('.') {
        return Ok(None);
    }
    let column_of = |idx: usize| -> usize {
        line.split(if line.contains('\t') { '\t' } else { ' ' })
            .take(idx)
            .map(|c| c.chars().count() + 1)
            .sum::<usize>()
            + 1
    };
    let id: usize = cols[0]
        .parse()
        .map_err(|_| ParseError::new(line_no, 1, format!("non-integer ID {:?}", cols[0])))?;
    let head: usize = cols[head_col].parse().map_err(|_| {
        ParseError::new(
            line_no,
            column_of(head_col),
            format!("non-integer Head {:?}", cols[head_col]),
        )
    })?;
    Ok(Some(Row {
        line: line_no,
        id,
        word: cols[1].to_string(),
        lemma: opt_col(cols[2]),
        pos: opt_col(cols[3]),
        head,
        rel: cols[rel_col].to_string(),
    }))
}

fn finish_block(rows: Vec<Row>) -> Result<ConllSentence> {
    let n = rows.len();
    for (k, r) in rows.iter().enumerate() {
        if r.id != k + 1 {
            return Err(ParseError::new(
                r.line,
                1,
                format!("ID sequence gap: expected {}, found {}", k + 1, r.id),
            )
            .into());
        }
        if r.head > n {
            return Err(ParseError::new(
                r.line,
                1,
                format!("head {} out of range for sentence of {n} tokens", r.head),
            )
            .into());
        }
    }
    let heads = rows
        .iter()
        .map(|r| {
            if r.head == 0 {
                Head::Root
            } else {
                Head::Token(r.head - 1)
            }
        })
        .collect();
    let labels = if rows.iter().all(|r| r.rel == "_") {
        None
    } else {
        Some(rows.iter().map(|r| r.rel.clone()).collect())
    };
    let mut lemmas = Vec::with_capacity(n);
    let mut pos = Vec::with_capacity(n);
    let mut words = Vec::with_capacity(n);
    for r in rows {
        lemmas.push(r.lemma);
        pos.push(r.pos);
        words.push(r.word);
    }
    Ok(ConllSentence {
        tokens: TokenSeq::new(words)?,
        tree: DepTree { heads, labels },
        lemmas,
        pos,
    })
}

pub fn parse_conll(text: &str) -> Result<Vec<ConllSentence>> {
    let mut out = Vec::new();
    let mut block = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !block.is_empty() {
                out.push(finish_block(std::mem::take(&mut block))?);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if let Some(row) = parse_row(i + 1, line)? {
            block.push(row);
        }
    }
    if !block.is_empty() {
        out.push(finish_block(block)?);
    }
    Ok(out)
}

/// Writes the six-column table; absent lemma/POS/relation become `_`.
pub fn emit_conll(sentences: &[ConllSentence]) -> String {
    let mut out = String::new();
    for (k, s) in sentences.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for (i, word) in s.tokens.tokens().iter().enumerate() {
            let head = match s.tree.heads[i] {
                Head::Root => 0,
                Head::Token(j) => j + 1,
            };
            let rel = s.tree.labels.as_ref().map_or("_", |l| l[i].as_str());
            let lemma = s.lemmas.get(i).and_then(|l| l.as_deref()).unwrap_or("_");
            let pos = s.pos.get(i).and_then(|p| p.as_deref()).unwrap_or("_");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                i + 1,
                word,
                lemma,
                pos,
                head,
                rel
            ));
        }
    }
    out
}
