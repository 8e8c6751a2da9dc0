//! Masking, the masked-LM loss and the adapted perplexity.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{bind, forward_graph, DropoutRng, Graph, ModelState, Params, Tensor};
use crate::treebank::Vocab;

/// Ids the masking procedure treats specially.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub pad: u32,
    pub mask: u32,
}

impl From<&Vocab> for SpecialIds {
    fn from(v: &Vocab) -> Self {
        SpecialIds {
            pad: v.pad_id(),
            mask: v.mask_id(),
        }
    }
}

/// One sentence after masking.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedSentence {
    /// Original ids with masked positions replaced by `<mask>`.
    pub input: Vec<u32>,
    pub pad_mask: Vec<bool>,
    /// Masked positions in increasing order.
    pub positions: Vec<usize>,
    /// Original id at each masked position.
    pub targets: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaskedBatch {
    pub sentences: Vec<MaskedSentence>,
}

impl MaskedBatch {
    pub fn num_masked(&self) -> usize {
        self.sentences.iter().map(|s| s.positions.len()).sum()
    }
}

/// Independently masks each non-pad position with probability `rate`.
pub fn mask_batch(
    batch: &[Vec<u32>],
    rate: f64,
    ids: SpecialIds,
    rng: &mut ChaCha8Rng,
) -> MaskedBatch {
    let sentences = batch
        .iter()
        .map(|sent| {
            let pad_mask: Vec<bool> = sent.iter().map(|&t| t == ids.pad).collect();
            let mut input = sent.clone();
            let mut positions = Vec::new();
            let mut targets = Vec::new();
            for (i, tok) in input.iter_mut().enumerate() {
                if pad_mask[i] {
                    continue;
                }
                if rng.gen::<f64>() < rate {
                    positions.push(i);
                    targets.push(*tok);
                    *tok = ids.mask;
                }
            }
            MaskedSentence {
                input,
                pad_mask,
                positions,
                targets,
            }
        })
        .collect();
    MaskedBatch { sentences }
}

fn log_softmax_at(row: &[f64], target: usize) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
    row[target] - m - z.ln()
}

/// Mean negative log-likelihood over the masked positions of `batch`,
/// given one logits matrix per sentence.
pub fn mlm_loss(logits: &[Tensor], batch: &MaskedBatch) -> Result<f64> {
    if logits.len() != batch.sentences.len() {
        return Err(Error::LengthMismatch {
            expected: batch.sentences.len(),
            found: logits.len(),
        });
    }
    let count = batch.num_masked();
    if count == 0 {
        return Err(Error::NoMaskedTokens);
    }
    let mut acc = KahanSum::default();
    for (l, s) in logits.iter().zip(&batch.sentences) {
        for (&pos, &t) in s.positions.iter().zip(&s.targets) {
            if pos >= l.rows || t as usize >= l.cols {
                return Err(Error::Shape(format!(
                    "target ({pos}, {t}) outside logits {:?}",
                    l.shape()
                )));
            }
            acc.add(-log_softmax_at(l.row(pos), t as usize));
        }
    }
    Ok(acc.total() / count as f64)
}

/// Loss and parameter gradients for one masked batch.
pub fn loss_and_grads(
    state: &ModelState,
    batch: &MaskedBatch,
    mut dropout: Option<&mut DropoutRng<'_>>,
) -> Result<(f64, Params<Tensor>)> {
    let count = batch.num_masked();
    if count == 0 {
        return Err(Error::NoMaskedTokens);
    }
    let cfg = &state.config;
    let vanilla = cfg.arch == crate::model::Arch::Vanilla;
    let mut g = Graph::new();
    let p = bind(&mut g, &state.params);
    let mut terms = Vec::new();
    for s in &batch.sentences {
        if s.positions.is_empty() {
            continue;
        }
        let (ids, targets) = compact_sentence(s, cfg.vocab_size)?;
        let out = forward_graph(&mut g, &p, cfg, &ids, vanilla, dropout.as_deref_mut());
        terms.push(g.cross_entropy(out.logits, &targets, count as f64));
    }
    let loss = g.sum(&terms);
    let grads = g.backward(loss);
    let value = g.value(loss).data[0];
    Ok((value, p.map(|&v| grads.get(v, g.value(v)))))
}

/// `(row, class)` of one masked position.
type Target = (usize, usize);

/// Pad-free ids and `(row, target)` pairs re-indexed to them.
fn compact_sentence(s: &MaskedSentence, vocab_size: usize) -> Result<(Vec<u32>, Vec<Target>)> {
    let mut row_of = vec![usize::MAX; s.input.len()];
    let mut ids = Vec::with_capacity(s.input.len());
    for (i, &t) in s.input.iter().enumerate() {
        if !s.pad_mask[i] {
            if t as usize >= vocab_size {
                return Err(Error::IndexOutOfRange {
                    index: t as isize,
                    len: vocab_size,
                });
            }
            row_of[i] = ids.len();
            ids.push(t);
        }
    }
    let targets = s
        .positions
        .iter()
        .zip(&s.targets)
        .map(|(&p, &t)| (row_of[p], t as usize))
        .collect();
    Ok((ids, targets))
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Anything that assigns log-probabilities to the targets of a masked sentence.
pub trait MaskedScorer {
    /// `log P(target_k | input)` for every masked position, in order.
    fn target_log_probs(&self, sentence: &MaskedSentence) -> Result<Vec<f64>>;
}

impl MaskedScorer for ModelState {
    fn target_log_probs(&self, s: &MaskedSentence) -> Result<Vec<f64>> {
        let out = crate::model::encoder_forward(&s.input, &s.pad_mask, self)?;
        Ok(s.positions
            .iter()
            .zip(&s.targets)
            .map(|(&p, &t)| log_softmax_at(out.logits.row(p), t as usize))
            .collect())
    }
}

/// Assigns probability `1 / vocab_size` to everything.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab_size: usize,
}

impl MaskedScorer for UniformScorer {
    fn target_log_probs(&self, s: &MaskedSentence) -> Result<Vec<f64>> {
        Ok(vec![-(self.vocab_size as f64).ln(); s.positions.len()])
    }
}

/// Assigns probability 1 to every target.
#[derive(Debug, Clone, Copy)]
pub struct PerfectScorer;

impl MaskedScorer for PerfectScorer {
    fn target_log_probs(&self, s: &MaskedSentence) -> Result<Vec<f64>> {
        Ok(vec![0.0; s.positions.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PplMode {
    /// exp of total masked NLL over total masked count.
    #[default]
    Pooled,
    /// Mean over sentences of each sentence's own perplexity.
    PerSentence,
}

/// Total masked NLL and masked count, using masks drawn once from `eval_seed`.
pub fn masked_nll(
    scorer: &impl MaskedScorer,
    corpus: &[Vec<u32>],
    mask_rate: f64,
    eval_seed: u64,
    ids: SpecialIds,
) -> Result<Vec<(f64, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed);
    let batch = mask_batch(corpus, mask_rate, ids, &mut rng);
    batch
        .sentences
        .iter()
        .map(|s| {
            let lp = scorer.target_log_probs(s)?;
            let mut acc = KahanSum::default();
            for v in lp {
                acc.add(-v);
            }
            Ok((acc.total(), s.positions.len()))
        })
        .collect()
}

/// Adapted masked-LM perplexity of `corpus`.
pub fn mlm_perplexity(
    scorer: &impl MaskedScorer,
    corpus: &[Vec<u32>],
    mask_rate: f64,
    eval_seed: u64,
    ids: SpecialIds,
    mode: PplMode,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let per = masked_nll(scorer, corpus, mask_rate, eval_seed, ids)?;
    let total: usize = per.iter().map(|p| p.1).sum();
    if total == 0 {
        return Err(Error::NoMaskedTokens);
    }
    match mode {
        PplMode::Pooled => {
            let mut acc = KahanSum::default();
            for (nll, _) in &per {
                acc.add(*nll);
            }
            Ok((acc.total() / total as f64).exp())
        }
        PplMode::PerSentence => {
            let scored: Vec<f64> = per
                .iter()
                .filter(|p| p.1 > 0)
                .map(|(nll, c)| (nll / *c as f64).exp())
                .collect();
            Ok(scored.iter().sum::<f64>() / scored.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDS: SpecialIds = SpecialIds { pad: 1, mask: 2 };

    #[test]
    fn masking_rates_and_padding() {
        let batch = vec![vec![5, 6, 7, 1, 1], vec![8, 9]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(mask_batch(&batch, 0.0, IDS, &mut rng).num_masked(), 0);
        let all = mask_batch(&batch, 1.0, IDS, &mut rng);
        assert_eq!(all.num_masked(), 5);
        assert_eq!(all.sentences[0].positions, vec![0, 1, 2]);
        assert_eq!(all.sentences[0].input, vec![2, 2, 2, 1, 1]);
        assert_eq!(all.sentences[0].targets, vec![5, 6, 7]);
        let a = mask_batch(&batch, 0.5, IDS, &mut ChaCha8Rng::seed_from_u64(3));
        let b = mask_batch(&batch, 0.5, IDS, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn loss_examples() {
        let s = MaskedSentence {
            input: vec![2, 2],
            pad_mask: vec![false, false],
            positions: vec![0, 1],
            targets: vec![0, 0],
        };
        let batch = MaskedBatch { sentences: vec![s] };
        // probabilities 1/2 and 1/4 on the targets
        let l = Tensor::from_vec(
            2,
            4,
            vec![
                3f64.ln(),
                1f64.ln(),
                1f64.ln(),
                1f64.ln(),
                1f64.ln(),
                1f64.ln(),
                1f64.ln(),
                1f64.ln(),
            ],
        );
        let want = (2f64.ln() + 4f64.ln()) / 2.0;
        assert!((mlm_loss(&[l], &batch).unwrap() - want).abs() < 1e-15);
        let uniform = Tensor::zeros(2, 4);
        assert!((mlm_loss(&[uniform], &batch).unwrap() - 4f64.ln()).abs() < 1e-15);
        let empty = MaskedBatch {
            sentences: vec![MaskedSentence {
                input: vec![5],
                pad_mask: vec![false],
                positions: vec![],
                targets: vec![],
            }],
        };
        assert!(matches!(
            mlm_loss(&[Tensor::zeros(1, 4)], &empty),
            Err(Error::NoMaskedTokens)
        ));
    }

    #[test]
    fn compensated_sum() {
        let mut k = KahanSum::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            k.add(v);
        }
        assert_eq!(k.total(), 2.0);
    }
}
