//! Unlabeled span scoring, attachment scores, cross-run consistency and
//! subword-constituent recall.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treebank::preprocess::SWC_LABEL;
use crate::trees::{ConstTree, DepTree, Span};

/// Which node spans count as constituents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanConvention {
    /// Keep the whole-sentence span.
    pub include_root: bool,
    /// Keep width-1 spans of explicit (non-leaf) nodes.
    pub include_single: bool,
}

impl Default for SpanConvention {
    fn default() -> Self {
        SpanConvention {
            include_root: false,
            include_single: true,
        }
    }
}

/// Spans of all internal nodes, filtered by `conv`. Bare leaves never count.
pub fn extract_const_spans(tree: &ConstTree, conv: SpanConvention) -> BTreeSet<Span> {
    let whole = tree.span();
    let mut out = BTreeSet::new();
    tree.walk(&mut |t| {
        if t.is_leaf() {
            return;
        }
        let s = t.span();
        if s == whole && !conv.include_root {
            return;
        }
        if s.width() == 1 && !conv.include_single {
            return;
        }
        out.insert(s);
    });
    out
}

/// Every node span, root and unary chains included.
pub fn all_node_spans(tree: &ConstTree) -> BTreeSet<Span> {
    extract_const_spans(
        tree,
        SpanConvention {
            include_root: true,
            include_single: true,
        },
    )
}

/// Precision, recall and F1 with the integer counts they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred: usize,
    pub n_gold: usize,
    pub n_match: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    /// One division per metric; `F1 = 2PR/(P+R) = 2·match/(pred+gold)`.
    pub fn from_counts(n_match: usize, n_pred: usize, n_gold: usize) -> Self {
        let precision = ratio(n_match, n_pred);
        let recall = ratio(n_match, n_gold);
        let f1 = if n_match == 0 {
            0.0
        } else {
            ratio(2 * n_match, n_pred + n_gold)
        };
        EvalReport {
            precision,
            recall,
            f1,
            n_pred,
            n_gold,
            n_match,
        }
    }
}

pub fn const_prf(pred: &BTreeSet<Span>, gold: &BTreeSet<Span>) -> EvalReport {
    EvalReport::from_counts(pred.intersection(gold).count(), pred.len(), gold.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Pool the counts over all sentences.
    #[default]
    Micro,
    /// Average the per-sentence ratios.
    Macro,
}

pub fn corpus_aggregate(reports: &[EvalReport], mode: Aggregation) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_match = reports.iter().map(|r| r.n_match).sum();
    let n_pred = reports.iter().map(|r| r.n_pred).sum();
    let n_gold = reports.iter().map(|r| r.n_gold).sum();
    Ok(match mode {
        Aggregation::Micro => EvalReport::from_counts(n_match, n_pred, n_gold),
        Aggregation::Macro => {
            let k = reports.len() as f64;
            EvalReport {
                precision: reports.iter().map(|r| r.precision).sum::<f64>() / k,
                recall: reports.iter().map(|r| r.recall).sum::<f64>() / k,
                f1: reports.iter().map(|r| r.f1).sum::<f64>() / k,
                n_pred,
                n_gold,
                n_match,
            }
        }
    })
}

/// Scores predicted trees against gold trees sentence by sentence.
pub fn corpus_const_eval(
    pred: &[ConstTree],
    gold: &[ConstTree],
    conv: SpanConvention,
    mode: Aggregation,
) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::SentenceCountMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    let mut reports = Vec::with_capacity(pred.len());
    for (p, g) in pred.iter().zip(gold) {
        if p.num_leaves() != g.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: g.num_leaves(),
                found: p.num_leaves(),
            });
        }
        reports.push(const_prf(
            &extract_const_spans(p, conv),
            &extract_const_spans(g, conv),
        ));
    }
    corpus_aggregate(&reports, mode)
}

/// Number of tokens with the same head (root matching root) and the length.
pub fn uas_counts(pred: &DepTree, gold: &DepTree) -> Result<(usize, usize)> {
    if pred.len() != gold.len() {
        return Err(Error::LengthMismatch {
            expected: gold.len(),
            found: pred.len(),
        });
    }
    let hits = pred
        .heads
        .iter()
        .zip(&gold.heads)
        .filter(|(a, b)| a == b)
        .count();
    Ok((hits, gold.len()))
}

pub fn uas(pred: &DepTree, gold: &DepTree) -> Result<f64> {
    let (hits, n) = uas_counts(pred, gold)?;
    Ok(ratio(hits, n))
}

/// Token-pooled attachment score over a corpus.
pub fn corpus_uas(pred: &[DepTree], gold: &[DepTree]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::SentenceCountMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mut hits, mut total) = (0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let (h, n) = uas_counts(p, g)?;
        hits += h;
        total += n;
    }
    Ok(ratio(hits, total))
}

/// Pairwise agreement between independently trained runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub mean: f64,
    /// `(run_a, run_b, score)` for every unordered pair.
    pub pairs: Vec<(usize, usize, f64)>,
}

fn pairwise<T>(
    runs: &[Vec<T>],
    score: impl Fn(&[T], &[T]) -> Result<f64>,
) -> Result<ConsistencyReport> {
    if runs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "self-consistency needs at least two runs, got {}",
            runs.len()
        )));
    }
    for r in &runs[1..] {
        if r.len() != runs[0].len() {
            return Err(Error::SentenceCountMismatch {
                left: runs[0].len(),
                right: r.len(),
            });
        }
    }
    let mut pairs = Vec::new();
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            pairs.push((a, b, score(&runs[a], &runs[b])?));
        }
    }
    let mean = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64;
    Ok(ConsistencyReport { mean, pairs })
}

/// Mean corpus UF1 over all run pairs, one run of each pair acting as reference.
pub fn self_consistency_const(
    runs: &[Vec<ConstTree>],
    conv: SpanConvention,
    mode: Aggregation,
) -> Result<ConsistencyReport> {
    pairwise(runs, |a, b| Ok(corpus_const_eval(a, b, conv, mode)?.f1))
}

/// Mean corpus UAS over all run pairs.
pub fn self_consistency_dep(runs: &[Vec<DepTree>]) -> Result<ConsistencyReport> {
    pairwise(runs, corpus_uas)
}

fn swc_spans(gold: &ConstTree) -> BTreeSet<Span> {
    let mut out = BTreeSet::new();
    gold.walk(&mut |t| {
        if !t.is_leaf() && t.label() == SWC_LABEL {
            out.insert(t.span());
        }
    });
    out
}

/// Gold SWC spans found among the predicted node spans, and the gold SWC count.
pub fn swc_counts(pred: &ConstTree, gold: &ConstTree) -> (usize, usize) {
    let gold_swc = swc_spans(gold);
    let pred_spans = all_node_spans(pred);
    (gold_swc.intersection(&pred_spans).count(), gold_swc.len())
}

/// Fraction of the gold tree's SWC spans present in `pred` under any label.
pub fn swc_recall(pred: &ConstTree, gold: &ConstTree) -> Result<f64> {
    let (hit, total) = swc_counts(pred, gold);
    if total == 0 {
        return Err(Error::UndefinedSwcRecall);
    }
    Ok(ratio(hit, total))
}

/// Pooled SWC recall over a corpus; sentences without SWC nodes add nothing.
pub fn corpus_swc_recall(pred: &[ConstTree], gold: &[ConstTree]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::SentenceCountMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    let (mut hit, mut total) = (0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let (h, t) = swc_counts(p, g);
        hit += h;
        total += t;
    }
    if total == 0 {
        return Err(Error::UndefinedSwcRecall);
    }
    Ok(ratio(hit, total))
}
