use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use structformer::model::{save_checkpoint, Arch, ModelConfig, ModelState, Positional};
use structformer::training::{train, AdamConfig, SpecialIds, TrainConfig};
use structformer::treebank::Vocab;

use crate::io::{read_sentences, read_text};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Small model for CPU runs and tests.
    Desk,
    /// Full-scale settings.
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ArchArg {
    Structformer,
    Vanilla,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PositionalArg {
    Sinusoidal,
    Learned,
    None,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Preprocessed training sentences.
    #[arg(long)]
    pub train: PathBuf,
    /// Preprocessed validation sentences.
    #[arg(long)]
    pub valid: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with partial `model` and `train` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,

    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    /// Number of blocks before the parser network.
    #[arg(long)]
    pub parser_pos: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub parser_layers: Option<usize>,
    #[arg(long)]
    pub conv_kernel: Option<usize>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    #[arg(long, value_enum)]
    pub positional: Option<PositionalArg>,
    #[arg(long)]
    pub tie_output: Option<bool>,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub batch_tokens: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub mask_rate: Option<f64>,
    /// Seeds initialization, shuffling, masking and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn profile(p: Profile, vocab_size: usize) -> Self {
        match p {
            Profile::Desk => RunConfig {
                model: ModelConfig::desk(vocab_size),
                train: TrainConfig {
                    epochs: 10,
                    batch_tokens: 1024,
                    optimizer: AdamConfig {
                        lr: 1e-3,
                        warmup_steps: 50,
                        ..AdamConfig::default()
                    },
                    ..TrainConfig::default()
                },
            },
            Profile::Paper => RunConfig {
                model: ModelConfig::paper(vocab_size),
                train: TrainConfig::default(),
            },
        }
    }
}

/// Overlays `patch` onto `base`, recursing into objects. Keys absent from
/// `base` are rejected so that typos do not pass silently.
fn overlay(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v, &here)?,
                    Some(slot) => *slot = v.clone(),
                    None => bail!("unknown config key {here:?}"),
                }
            }
            Ok(())
        }
        _ => bail!("config section {path:?} must be an object"),
    }
}

/// Built-in profile, then the JSON file, then explicit flags.
pub fn resolve(args: &Args, vocab_size: usize) -> Result<RunConfig> {
    let mut cfg = RunConfig::profile(args.profile, vocab_size);
    if let Some(p) = &args.config {
        let patch: Value =
            serde_json::from_str(&read_text(p)?).with_context(|| format!("in {}", p.display()))?;
        let mut base = serde_json::to_value(&cfg)?;
        overlay(&mut base, &patch, "").with_context(|| format!("in {}", p.display()))?;
        cfg = serde_json::from_value(base).with_context(|| format!("in {}", p.display()))?;
    }
    let m = &mut cfg.model;
    if let Some(a) = args.arch {
        m.arch = match a {
            ArchArg::Structformer => Arch::StructFormer,
            ArchArg::Vanilla => Arch::Vanilla,
        };
    }
    if let Some(p) = args.positional {
        m.positional = match p {
            PositionalArg::Sinusoidal => Positional::Sinusoidal,
            PositionalArg::Learned => Positional::Learned,
            PositionalArg::None => Positional::None,
        };
    }
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = args.$flag { $field = v; })*
        };
    }
    set! {
        parser_pos => m.parser_position,
        layers => m.layers,
        heads => m.heads,
        d_model => m.d_model,
        d_ff => m.d_ff,
        dropout => m.dropout,
        parser_layers => m.parser_layers,
        conv_kernel => m.conv_kernel,
        max_seq_len => m.max_seq_len,
        tie_output => m.tie_output,
        seed => m.seed,
    }
    let t = &mut cfg.train;
    set! {
        epochs => t.epochs,
        batch_tokens => t.batch_tokens,
        lr => t.optimizer.lr,
        warmup => t.optimizer.warmup_steps,
        mask_rate => t.mask_rate,
        seed => t.seed,
    }
    if args.max_steps.is_some() {
        t.max_steps = args.max_steps;
    }
    if args.grad_clip.is_some() {
        t.optimizer.grad_clip = args.grad_clip;
    }
    // the vocabulary file decides the output size
    cfg.model.vocab_size = vocab_size;
    cfg.model.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Summary {
    steps: usize,
    best_epoch: Option<usize>,
    best_valid_loss: Option<f64>,
    final_train_loss: Option<f64>,
}

pub fn run(args: Args) -> Result<()> {
    let vocab = Vocab::from_file_str(&read_text(&args.vocab)?)
        .with_context(|| format!("in {}", args.vocab.display()))?;
    let mut cfg = resolve(&args, vocab.len())?;
    let checkpoint = args.out.join(CHECKPOINT_FILE);
    let metrics = args.out.join(METRICS_FILE);
    cfg.train.checkpoint = Some(checkpoint.clone());
    cfg.train.metrics_log = Some(metrics.clone());

    let mut manifest = RunManifest::new("train", &cfg, Some(cfg.train.seed))?;
    for p in [&args.train, &args.valid, &args.vocab] {
        manifest.input(p)?;
    }
    if let Some(p) = &args.config {
        manifest.input(p)?;
    }
    manifest.artifact(&checkpoint);
    manifest.artifact(&metrics);
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    manifest.write(&args.out.join(MANIFEST_FILE))?;

    let encode = |path: &PathBuf| -> Result<Vec<Vec<u32>>> {
        let sents = read_sentences(path)?;
        if let Some(s) = sents.iter().find(|s| s.len() > cfg.model.max_seq_len) {
            bail!(
                "{}: sentence of {} tokens exceeds max_seq_len {}",
                path.display(),
                s.len(),
                cfg.model.max_seq_len
            );
        }
        Ok(sents.iter().map(|s| vocab.encode(s)).collect())
    };
    let train_ids = encode(&args.train)?;
    let valid_ids = encode(&args.valid)?;

    let state = ModelState::init(cfg.model.clone())?;
    let out = train(
        state,
        &train_ids,
        &valid_ids,
        SpecialIds::from(&vocab),
        &cfg.train,
    )?;
    save_checkpoint(&out.best, &checkpoint)
        .with_context(|| format!("writing {}", checkpoint.display()))?;
    let summary = Summary {
        steps: out.step_losses.len(),
        best_epoch: out.best_epoch,
        best_valid_loss: out.best_valid_loss,
        final_train_loss: out.step_losses.last().copied(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
