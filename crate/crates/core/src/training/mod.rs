//! Masked-LM pretraining with validation-based checkpoint selection.

pub mod mlm;
pub mod optim;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use mlm::{
    loss_and_grads, mask_batch, masked_nll, mlm_loss, mlm_perplexity, KahanSum, MaskedBatch,
    MaskedScorer, MaskedSentence, PerfectScorer, PplMode, SpecialIds, UniformScorer,
};
pub use optim::{Adam, AdamConfig};

use crate::error::{Error, Result};
use crate::model::{save_checkpoint, DropoutRng, ModelState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mask_rate: f64,
    pub batch_tokens: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub max_steps: Option<usize>,
    pub optimizer: AdamConfig,
    /// Seeds shuffling, training masks and dropout.
    pub seed: u64,
    pub eval_mask_seed: u64,
    /// Where the best-validation state is written, if anywhere.
    pub checkpoint: Option<PathBuf>,
    /// One JSON object per epoch.
    pub metrics_log: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mask_rate: 0.3,
            batch_tokens: 4096,
            epochs: 100,
            max_steps: None,
            optimizer: AdamConfig::default(),
            seed: 0,
            eval_mask_seed: 1234,
            checkpoint: None,
            metrics_log: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, longest: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(Error::InvalidConfig(format!(
                "mask rate {} outside [0, 1]",
                self.mask_rate
            )));
        }
        if self.batch_tokens < longest {
            return Err(Error::InvalidConfig(format!(
                "batch_tokens {} is below the longest sentence ({longest})",
                self.batch_tokens
            )));
        }
        Ok(())
    }
}

/// Per-epoch metrics record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_ppl: f64,
    pub wall_ms: u64,
}

/// Scores a state on held-out data after each epoch; lower is better.
pub trait Validator {
    fn validation_loss(&mut self, state: &ModelState, epoch: usize) -> Result<f64>;
}

/// Pooled masked NLL on a fixed split with masks drawn from a fixed seed.
pub struct MlmValidator<'a> {
    pub corpus: &'a [Vec<u32>],
    pub mask_rate: f64,
    pub eval_seed: u64,
    pub ids: SpecialIds,
}

impl Validator for MlmValidator<'_> {
    fn validation_loss(&mut self, state: &ModelState, _epoch: usize) -> Result<f64> {
        let per = masked_nll(state, self.corpus, self.mask_rate, self.eval_seed, self.ids)?;
        let count: usize = per.iter().map(|p| p.1).sum();
        if count == 0 {
            return Err(Error::NoMaskedTokens);
        }
        let mut acc = KahanSum::default();
        for (nll, _) in per {
            acc.add(nll);
        }
        Ok(acc.total() / count as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: ModelState,
    pub best_epoch: Option<usize>,
    pub best_valid_loss: Option<f64>,
    pub final_state: ModelState,
    pub history: Vec<EpochMetrics>,
    /// Training loss of every optimizer step.
    pub step_losses: Vec<f64>,
}

/// Groups sentences of similar length into batches of at most
/// `batch_tokens` padded tokens, in a seed-dependent order.
pub fn make_batches(
    lengths: &[usize],
    batch_tokens: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut longest = 0;
    for i in order {
        let l = lengths[i].max(longest);
        if !current.is_empty() && l * (current.len() + 1) > batch_tokens {
            batches.push(std::mem::take(&mut current));
            longest = 0;
        }
        longest = longest.max(lengths[i]);
        current.push(i);
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches.shuffle(rng);
    batches
}

/// Trains with the default masked-LM validator on `valid`.
pub fn train(
    state: ModelState,
    train_set: &[Vec<u32>],
    valid: &[Vec<u32>],
    ids: SpecialIds,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut validator = MlmValidator {
        corpus: valid,
        mask_rate: config.mask_rate,
        eval_seed: config.eval_mask_seed,
        ids,
    };
    train_with_validator(state, train_set, ids, config, &mut validator)
}

pub fn train_with_validator(
    mut state: ModelState,
    train_set: &[Vec<u32>],
    ids: SpecialIds,
    config: &TrainConfig,
    validator: &mut impl Validator,
) -> Result<TrainOutcome> {
    state.config.validate()?;
    let longest = train_set.iter().map(Vec::len).max().unwrap_or(0);
    config.validate(longest)?;
    if train_set.is_empty() && config.epochs > 0 {
        return Err(Error::EmptyCorpus);
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.optimizer.clone(), &state.params);
    let mut metrics = match &config.metrics_log {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Some(BufWriter::new(File::create(p)?))
        }
        None => None,
    };
    let lengths: Vec<usize> = train_set.iter().map(Vec::len).collect();
    let mut best = state.clone();
    let mut best_loss: Option<f64> = None;
    let mut best_epoch = None;
    let mut history = Vec::new();
    let mut step_losses = Vec::new();
    let dropout_rate = state.config.dropout;
    'epochs: for epoch in 0..config.epochs {
        let batches = make_batches(&lengths, config.batch_tokens, &mut rng);
        let mut epoch_loss = KahanSum::default();
        let mut epoch_steps = 0usize;
        for batch_idx in batches {
            if config.max_steps.is_some_and(|m| adam.step >= m) {
                break;
            }
            let sentences: Vec<Vec<u32>> =
                batch_idx.iter().map(|&i| train_set[i].clone()).collect();
            let batch = mask_batch(&sentences, config.mask_rate, ids, &mut rng);
            if batch.num_masked() == 0 {
                log::debug!("epoch {epoch}: batch without masked tokens skipped");
                continue;
            }
            let (loss, grads) = {
                let mut drop = DropoutRng {
                    rate: dropout_rate,
                    rng: &mut rng,
                };
                loss_and_grads(&state, &batch, Some(&mut drop))?
            };
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step: adam.step,
                });
            }
            adam.update(&mut state.params, &grads);
            step_losses.push(loss);
            epoch_loss.add(loss);
            epoch_steps += 1;
        }
        let valid_loss = validator.validation_loss(&state, epoch)?;
        let record = EpochMetrics {
            epoch,
            step: adam.step,
            train_loss: if epoch_steps > 0 {
                epoch_loss.total() / epoch_steps as f64
            } else {
                f64::NAN
            },
            valid_loss,
            valid_ppl: valid_loss.exp(),
            wall_ms: start.elapsed().as_millis() as u64,
        };
        log::info!(
            "epoch {epoch} step {} train {:.4} valid {:.4}",
            record.step,
            record.train_loss,
            record.valid_loss
        );
        if let Some(w) = metrics.as_mut() {
            serde_json::to_writer(&mut *w, &record)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        history.push(record);
        if best_loss.is_none_or(|b| valid_loss < b) {
            best_loss = Some(valid_loss);
            best_epoch = Some(epoch);
            best = state.clone();
            if let Some(p) = &config.checkpoint {
                save_checkpoint(&best, p)?;
            }
        }
        if config.max_steps.is_some_and(|m| adam.step >= m) {
            break 'epochs;
        }
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_valid_loss: best_loss,
        final_state: state,
        history,
        step_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_respect_token_budget() {
        let lengths = vec![3, 9, 4, 4, 7, 2, 8, 5];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batches = make_batches(&lengths, 12, &mut rng);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        for b in &batches {
            let longest = b.iter().map(|&i| lengths[i]).max().unwrap();
            assert!(longest * b.len() <= 12);
        }
    }
}
