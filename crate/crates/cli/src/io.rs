use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use structformer::model::write_atomic;
use structformer::treebank::{parse_bracket_corpus, parse_conll, ConllSentence};
use structformer::ConstTree;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// One sentence per non-blank line, tokens separated by whitespace.
pub fn read_sentences(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_text(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect())
}

pub fn read_trees(path: &Path) -> Result<Vec<ConstTree>> {
    let text = read_text(path)?;
    let trees = parse_bracket_corpus(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(trees.into_iter().map(|(t, _)| t).collect())
}

pub fn read_conll(path: &Path) -> Result<Vec<ConllSentence>> {
    let text = read_text(path)?;
    parse_conll(&text).with_context(|| format!("in {}", path.display()))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut text = String::new();
    for l in lines {
        text.push_str(l.as_ref());
        text.push('\n');
    }
    write_file(path, &text)
}

/// Prints `report` to stdout and, if asked, writes it to `out`.
pub fn emit_report(report: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    println!("{json}");
    if let Some(p) = out {
        write_file(p, &(json + "\n"))?;
    }
    Ok(())
}
