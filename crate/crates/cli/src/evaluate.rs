use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::ValueEnum;
use serde::Serialize;
use structformer::eval::{
    corpus_const_eval, self_consistency_const, self_consistency_dep, swc_counts, uas_counts,
    Aggregation, ConsistencyReport, SpanConvention,
};
use structformer::{DepTree, Error};

use crate::induce::{CONLL_FILE, TREES_FILE};
use crate::io::{emit_report, read_conll, read_trees};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregateArg {
    Micro,
    Macro,
}

impl From<AggregateArg> for Aggregation {
    fn from(a: AggregateArg) -> Self {
        match a {
            AggregateArg::Micro => Aggregation::Micro,
            AggregateArg::Macro => Aggregation::Macro,
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct ConventionArgs {
    /// Count the whole-sentence span.
    #[arg(long)]
    pub include_root: bool,
    /// Ignore single-token spans.
    #[arg(long)]
    pub exclude_single: bool,
    #[arg(long = "aggregate", value_enum, default_value_t = AggregateArg::Micro)]
    pub aggregate: AggregateArg,
}

impl ConventionArgs {
    fn convention(&self) -> SpanConvention {
        SpanConvention {
            include_root: self.include_root,
            include_single: !self.exclude_single,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct ConstArgs {
    /// Induced trees, one bracketed tree per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference trees aligned line by line with `--pred`.
    #[arg(long)]
    pub gold: PathBuf,
    #[command(flatten)]
    pub convention: ConventionArgs,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct DepArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ConsistencyArgs {
    /// Induction output directory; repeat for every run.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    #[command(flatten)]
    pub convention: ConventionArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SwcArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference trees containing `SWC` nodes.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ConstReport {
    precision: f64,
    recall: f64,
    f1: f64,
    n_match: usize,
    n_pred: usize,
    n_gold: usize,
    n_sentences: usize,
    convention: SpanConvention,
    aggregation: Aggregation,
}

pub fn run_const(args: ConstArgs) -> Result<()> {
    let pred = read_trees(&args.pred)?;
    let gold = read_trees(&args.gold)?;
    let conv = args.convention.convention();
    let mode = args.convention.aggregate.into();
    let r = corpus_const_eval(&pred, &gold, conv, mode)?;
    let report = ConstReport {
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
        n_match: r.n_match,
        n_pred: r.n_pred,
        n_gold: r.n_gold,
        n_sentences: gold.len(),
        convention: conv,
        aggregation: mode,
    };
    emit_report(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct DepReport {
    uas: f64,
    n_correct: usize,
    n_tokens: usize,
    n_sentences: usize,
}

fn read_dep_trees(path: &std::path::Path) -> Result<Vec<DepTree>> {
    Ok(read_conll(path)?.into_iter().map(|s| s.tree).collect())
}

pub fn run_dep(args: DepArgs) -> Result<()> {
    let pred = read_dep_trees(&args.pred)?;
    let gold = read_dep_trees(&args.gold)?;
    if pred.len() != gold.len() {
        return Err(Error::SentenceCountMismatch {
            left: pred.len(),
            right: gold.len(),
        }
        .into());
    }
    if gold.is_empty() {
        return Err(Error::EmptyCorpus.into());
    }
    let (mut hits, mut total) = (0, 0);
    for (p, g) in pred.iter().zip(&gold) {
        let (h, n) = uas_counts(p, g)?;
        hits += h;
        total += n;
    }
    let report = DepReport {
        uas: if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        },
        n_correct: hits,
        n_tokens: total,
        n_sentences: gold.len(),
    };
    emit_report(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct PairScore {
    a: usize,
    b: usize,
    score: f64,
}

#[derive(Serialize)]
struct Consistency {
    mean: f64,
    pairs: Vec<PairScore>,
}

impl From<ConsistencyReport> for Consistency {
    fn from(r: ConsistencyReport) -> Self {
        Consistency {
            mean: r.mean,
            pairs: r
                .pairs
                .into_iter()
                .map(|(a, b, score)| PairScore { a, b, score })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct ConsistencyOut {
    runs: Vec<String>,
    n_sentences: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    uf1: Option<Consistency>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uas: Option<Consistency>,
    convention: SpanConvention,
    aggregation: Aggregation,
}

pub fn run_consistency(args: ConsistencyArgs) -> Result<()> {
    if args.runs.len() < 2 {
        bail!("self-consistency needs at least two --run directories");
    }
    let has_all = |file: &str| args.runs.iter().all(|r| r.join(file).is_file());
    let (with_trees, with_conll) = (has_all(TREES_FILE), has_all(CONLL_FILE));
    if !with_trees && !with_conll {
        bail!("run directories share neither {TREES_FILE} nor {CONLL_FILE}");
    }
    let conv = args.convention.convention();
    let mode: Aggregation = args.convention.aggregate.into();
    let mut n_sentences = 0;
    let uf1 = if with_trees {
        let runs = args
            .runs
            .iter()
            .map(|r| read_trees(&r.join(TREES_FILE)))
            .collect::<Result<Vec<_>>>()?;
        n_sentences = runs[0].len();
        Some(self_consistency_const(&runs, conv, mode)?.into())
    } else {
        None
    };
    let uas = if with_conll {
        let runs = args
            .runs
            .iter()
            .map(|r| read_dep_trees(&r.join(CONLL_FILE)))
            .collect::<Result<Vec<_>>>()?;
        n_sentences = runs[0].len();
        Some(self_consistency_dep(&runs)?.into())
    } else {
        None
    };
    let report = ConsistencyOut {
        runs: args.runs.iter().map(|r| r.display().to_string()).collect(),
        n_sentences,
        uf1,
        uas,
        convention: conv,
        aggregation: mode,
    };
    emit_report(&report, args.out.as_deref())
}

#[derive(Serialize)]
struct SwcReport {
    recall: f64,
    n_found: usize,
    n_swc: usize,
    n_sentences: usize,
}

pub fn run_swc(args: SwcArgs) -> Result<()> {
    let pred = read_trees(&args.pred)?;
    let gold = read_trees(&args.gold)?;
    if pred.len() != gold.len() {
        return Err(Error::SentenceCountMismatch {
            left: pred.len(),
            right: gold.len(),
        }
        .into());
    }
    let (mut found, mut total) = (0, 0);
    for (k, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.num_leaves() != g.num_leaves() {
            bail!(
                "sentence {}: prediction has {} leaves, reference {}",
                k + 1,
                p.num_leaves(),
                g.num_leaves()
            );
        }
        let (h, t) = swc_counts(p, g);
        found += h;
        total += t;
    }
    if total == 0 {
        return Err(Error::UndefinedSwcRecall.into());
    }
    let report = SwcReport {
        recall: found as f64 / total as f64,
        n_found: found,
        n_swc: total,
        n_sentences: gold.len(),
    };
    emit_report(&report, args.out.as_deref())
}
