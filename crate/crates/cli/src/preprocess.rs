use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use structformer::subword::{merge_presplit, preprocess_subword_tree, subword_stats, MergeRuleSet};
use structformer::treebank::preprocess::normalize_word;
use structformer::treebank::{
    build_word_vocab, emit_bracket, is_punctuation, preprocess_ptb, preprocess_ptb_tree,
    remove_punctuation, train_bpe, BpeModel, Vocab,
};
use structformer::{ConstTree, Error, TokenSeq};

use crate::io::{read_sentences, read_text, read_trees, write_file, write_lines};
use crate::manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Lowercased words, digits as `N`, rare words as `<unk>`.
    Word,
    /// Cased BPE pieces; reference trees gain `SWC` nodes.
    Subword,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// One bracketed tree per line.
    Bracket,
    /// One whitespace-tokenized sentence per line.
    Text,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Mode::Word)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = InputFormat::Bracket)]
    pub format: InputFormat,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Word vocabulary size, reserved tokens included.
    #[arg(long, default_value_t = 10001)]
    pub vocab_size: usize,
    /// Target BPE symbol inventory.
    #[arg(long, default_value_t = 8000)]
    pub bpe_size: usize,
    /// Keep the part-of-speech layer of reference trees.
    #[arg(long)]
    pub keep_preterminals: bool,
    /// Merge rule file for re-fusing pre-split words (subword mode).
    #[arg(long)]
    pub merge_rules: Option<PathBuf>,
}

/// A sentence before preprocessing.
enum Raw {
    Tree(ConstTree),
    Tokens(Vec<String>),
}

impl Raw {
    fn tokens(&self) -> Vec<String> {
        match self {
            Raw::Tree(t) => t.leaves().into_iter().map(String::from).collect(),
            Raw::Tokens(t) => t.clone(),
        }
    }
}

/// A sentence after preprocessing: model input tokens and, for bracket
/// input, the reference tree.
struct Processed {
    tokens: Vec<String>,
    tree: Option<ConstTree>,
}

#[derive(Serialize)]
struct Summary {
    mode: Mode,
    vocab_size: usize,
    sentences: BTreeMap<String, usize>,
    skipped: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    swc_fraction: Option<f64>,
}

fn load(path: &Path, format: InputFormat) -> Result<Vec<Raw>> {
    Ok(match format {
        InputFormat::Bracket => read_trees(path)?.into_iter().map(Raw::Tree).collect(),
        InputFormat::Text => read_sentences(path)?.into_iter().map(Raw::Tokens).collect(),
    })
}

/// Turns per-sentence results into kept sentences, skipping sentences
/// that preprocessing emptied.
fn keep_nonempty(results: Vec<structformer::Result<Processed>>) -> Result<(Vec<Processed>, usize)> {
    let mut kept = Vec::new();
    let mut skipped = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => kept.push(p),
            Err(Error::EmptyAfterPreprocessing) => {
                log::info!("sentence {} is empty after preprocessing, skipped", i + 1);
                skipped += 1;
            }
            Err(e) => return Err(e).with_context(|| format!("sentence {}", i + 1)),
        }
    }
    Ok((kept, skipped))
}

fn word_mode(
    args: &Args,
    splits: &[(String, Vec<Raw>)],
) -> Result<(Vocab, Vec<Vec<structformer::Result<Processed>>>)> {
    let train_words: Vec<String> = splits[0]
        .1
        .iter()
        .flat_map(Raw::tokens)
        .filter(|t| !is_punctuation(t))
        .map(|t| normalize_word(&t))
        .collect();
    let vocab = build_word_vocab(train_words.iter().map(String::as_str), args.vocab_size)?;
    let processed = splits
        .iter()
        .map(|(_, raws)| {
            raws.iter()
                .map(|raw| match raw {
                    Raw::Tree(t) => {
                        let tree = preprocess_ptb_tree(t.clone(), &vocab, args.keep_preterminals)?;
                        let tokens = tree.leaves().into_iter().map(String::from).collect();
                        Ok(Processed {
                            tokens,
                            tree: Some(tree),
                        })
                    }
                    Raw::Tokens(t) => Ok(Processed {
                        tokens: preprocess_ptb(&TokenSeq::new(t.clone())?, &vocab)?.into_tokens(),
                        tree: None,
                    }),
                })
                .collect()
        })
        .collect();
    Ok((vocab, processed))
}

/// Words after re-fusing pre-split tokens and removing punctuation.
fn subword_words(
    raw: &Raw,
    rules: &MergeRuleSet,
    keep_preterminals: bool,
) -> structformer::Result<Vec<String>> {
    let tree = match raw {
        Raw::Tree(t) if keep_preterminals => t.clone(),
        Raw::Tree(t) => t.clone().without_preterminals(),
        Raw::Tokens(t) => ConstTree::node(
            "X",
            t.iter()
                .enumerate()
                .map(|(i, w)| ConstTree::leaf(w.clone(), i))
                .collect(),
        ),
    };
    let merged = merge_presplit(&tree, rules)?;
    let cleaned = remove_punctuation(merged).ok_or(Error::EmptyAfterPreprocessing)?;
    Ok(cleaned.leaves().into_iter().map(String::from).collect())
}

type SubwordOut = (Vocab, BpeModel, Vec<Vec<structformer::Result<Processed>>>);

fn subword_mode(args: &Args, splits: &[(String, Vec<Raw>)]) -> Result<SubwordOut> {
    let rules = match &args.merge_rules {
        Some(p) => {
            MergeRuleSet::parse(&read_text(p)?).with_context(|| format!("in {}", p.display()))?
        }
        None => MergeRuleSet::default(),
    };
    let train_words: Vec<String> = splits[0]
        .1
        .iter()
        .filter_map(|r| subword_words(r, &rules, args.keep_preterminals).ok())
        .flatten()
        .collect();
    let bpe = train_bpe(train_words.iter().map(String::as_str), args.bpe_size)?;
    let pieces: Vec<String> = train_words.iter().flat_map(|w| bpe.encode(w)).collect();
    let vocab = build_word_vocab(pieces.iter().map(String::as_str), usize::MAX)?;
    let processed = splits
        .iter()
        .map(|(_, raws)| {
            raws.iter()
                .map(|raw| {
                    let words = subword_words(raw, &rules, args.keep_preterminals)?;
                    let tokens = words.iter().flat_map(|w| bpe.encode(w)).collect();
                    let tree = match raw {
                        Raw::Tree(t) => Some(preprocess_subword_tree(
                            t.clone(),
                            &rules,
                            &bpe,
                            args.keep_preterminals,
                        )?),
                        Raw::Tokens(_) => None,
                    };
                    Ok(Processed { tokens, tree })
                })
                .collect()
        })
        .collect();
    Ok((vocab, bpe, processed))
}

pub fn run(args: Args) -> Result<()> {
    let named: Vec<(&str, &PathBuf)> = [
        ("train", Some(&args.train)),
        ("valid", args.valid.as_ref()),
        ("test", args.test.as_ref()),
    ]
    .into_iter()
    .filter_map(|(n, p)| p.map(|p| (n, p)))
    .collect();

    let mut manifest = RunManifest::new("preprocess", &args, None)?;
    for (_, p) in &named {
        manifest.input(p)?;
    }
    if let Some(p) = &args.merge_rules {
        manifest.input(p)?;
    }
    let vocab_path = args.out.join("vocab.txt");
    let bpe_path = args.out.join("bpe.txt");
    manifest.artifact(&vocab_path);
    if args.mode == Mode::Subword {
        manifest.artifact(&bpe_path);
    }
    for (name, _) in &named {
        manifest.artifact(&args.out.join(format!("{name}.txt")));
        if args.format == InputFormat::Bracket {
            manifest.artifact(&args.out.join(format!("{name}.trees")));
        }
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    manifest.write(&args.out.join(MANIFEST_FILE))?;

    let mut splits = Vec::new();
    for (name, p) in &named {
        splits.push((name.to_string(), load(p, args.format)?));
    }

    let (vocab, processed) = match args.mode {
        Mode::Word => word_mode(&args, &splits)?,
        Mode::Subword => {
            let (vocab, bpe, processed) = subword_mode(&args, &splits)?;
            write_file(&bpe_path, &bpe.to_file_string())?;
            (vocab, processed)
        }
    };
    write_file(&vocab_path, &vocab.to_file_string())?;

    let mut summary = Summary {
        mode: args.mode,
        vocab_size: vocab.len(),
        sentences: BTreeMap::new(),
        skipped: BTreeMap::new(),
        swc_fraction: None,
    };
    for ((name, _), results) in splits.iter().zip(processed) {
        let (kept, skipped) = keep_nonempty(results)?;
        write_lines(
            &args.out.join(format!("{name}.txt")),
            kept.iter().map(|p| p.tokens.join(" ")),
        )?;
        let trees: Vec<&ConstTree> = kept.iter().filter_map(|p| p.tree.as_ref()).collect();
        if args.format == InputFormat::Bracket {
            write_lines(
                &args.out.join(format!("{name}.trees")),
                trees.iter().map(|t| emit_bracket(t)),
            )?;
            if args.mode == Mode::Subword && name == "train" && !trees.is_empty() {
                let owned: Vec<ConstTree> = trees.iter().map(|t| (*t).clone()).collect();
                summary.swc_fraction = Some(subword_stats(&owned)?.swc_fraction);
            }
        }
        summary.sentences.insert(name.clone(), kept.len());
        summary.skipped.insert(name.clone(), skipped);
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
