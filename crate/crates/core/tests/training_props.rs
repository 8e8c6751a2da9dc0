use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structformer::model::{load_checkpoint, ModelConfig, ModelState};
use structformer::synthetic::template_corpus;
use structformer::training::{
    mask_batch, mlm_loss, mlm_perplexity, train, train_with_validator, AdamConfig, MaskedScorer,
    PerfectScorer, PplMode, SpecialIds, TrainConfig, UniformScorer, Validator,
};
use structformer::treebank::{build_word_vocab, Vocab};
use structformer::Result;

fn corpus(count: usize, seed: u64) -> (Vocab, Vec<Vec<u32>>) {
    let trees = template_corpus(count, seed);
    let words: Vec<Vec<String>> = trees
        .iter()
        .map(|t| t.leaves().into_iter().map(String::from).collect())
        .collect();
    let vocab = build_word_vocab(words.iter().flatten().map(String::as_str), 100).unwrap();
    let ids = words.iter().map(|w| vocab.encode(w)).collect();
    (vocab, ids)
}

fn smoke_config(vocab: &Vocab) -> ModelConfig {
    ModelConfig {
        seed: 3,
        ..ModelConfig::desk(vocab.len())
    }
}

fn smoke_train_config() -> TrainConfig {
    TrainConfig {
        batch_tokens: 256,
        epochs: 10,
        max_steps: Some(200),
        optimizer: AdamConfig {
            lr: 3e-3,
            warmup_steps: 20,
            ..AdamConfig::default()
        },
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn smoke_run_halves_training_loss() {
    let (vocab, data) = corpus(2000, 1);
    let (train_set, valid) = data.split_at(1900);
    let state = ModelState::init(smoke_config(&vocab)).unwrap();
    let out = train(
        state,
        train_set,
        valid,
        SpecialIds::from(&vocab),
        &smoke_train_config(),
    )
    .unwrap();
    let losses = &out.step_losses;
    assert_eq!(losses.len(), 200);
    let head: f64 = losses[..5].iter().sum::<f64>() / 5.0;
    let tail: f64 = losses[190..].iter().sum::<f64>() / 10.0;
    assert!(tail <= 0.5 * head, "loss went from {head} to {tail}");
}

#[test]
fn same_seed_runs_are_bit_identical() {
    let (vocab, data) = corpus(300, 2);
    let (train_set, valid) = data.split_at(250);
    let cfg = TrainConfig {
        epochs: 2,
        max_steps: None,
        ..smoke_train_config()
    };
    let mut model = smoke_config(&vocab);
    model.dropout = 0.1;
    let ids = SpecialIds::from(&vocab);
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let cfg = TrainConfig {
            checkpoint: Some(dir.path().join(name)),
            ..cfg.clone()
        };
        train(
            ModelState::init(model.clone()).unwrap(),
            train_set,
            valid,
            ids,
            &cfg,
        )
        .unwrap()
    };
    let a = run("a.json");
    let b = run("b.json");
    assert_eq!(a.best, b.best);
    assert_eq!(a.step_losses, b.step_losses);
    let bytes_a = std::fs::read(dir.path().join("a.json")).unwrap();
    let bytes_b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert_eq!(load_checkpoint(&dir.path().join("a.json")).unwrap(), a.best);
}

/// Replays a fixed validation curve and remembers the states it saw.
struct Scripted {
    curve: Vec<f64>,
    seen: Vec<ModelState>,
}

impl Validator for Scripted {
    fn validation_loss(&mut self, state: &ModelState, epoch: usize) -> Result<f64> {
        self.seen.push(state.clone());
        Ok(self.curve[epoch])
    }
}

#[test]
fn best_validation_state_is_kept() {
    let (vocab, data) = corpus(120, 3);
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.jsonl");
    let cfg = TrainConfig {
        epochs: 5,
        max_steps: None,
        checkpoint: Some(dir.path().join("best.json")),
        metrics_log: Some(metrics.clone()),
        ..smoke_train_config()
    };
    let mut v = Scripted {
        curve: vec![3.0, 2.0, 2.5, 1.5, 1.8],
        seen: Vec::new(),
    };
    let state = ModelState::init(smoke_config(&vocab)).unwrap();
    let out = train_with_validator(state, &data, SpecialIds::from(&vocab), &cfg, &mut v).unwrap();
    assert_eq!(out.best_epoch, Some(3));
    assert_eq!(out.best_valid_loss, Some(1.5));
    assert_eq!(out.best, v.seen[3]);
    assert_ne!(out.best, v.seen[4]);
    assert_eq!(out.final_state, v.seen[4]);
    assert_eq!(
        load_checkpoint(&dir.path().join("best.json")).unwrap(),
        v.seen[3]
    );

    let text = std::fs::read_to_string(metrics).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 5);
    for (k, l) in lines.iter().enumerate() {
        for key in [
            "epoch",
            "step",
            "train_loss",
            "valid_loss",
            "valid_ppl",
            "wall_ms",
        ] {
            assert!(l.get(key).is_some(), "missing {key}");
        }
        assert_eq!(l["epoch"], k);
        assert_eq!(l["valid_loss"].as_f64().unwrap(), v.curve[k]);
    }
}

#[test]
fn zero_epochs_return_initial_state() {
    let (vocab, data) = corpus(50, 4);
    let state = ModelState::init(smoke_config(&vocab)).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        ..smoke_train_config()
    };
    let out = train(state.clone(), &data, &data, SpecialIds::from(&vocab), &cfg).unwrap();
    assert_eq!(out.best, state);
    assert!(out.history.is_empty());
}

#[test]
fn invalid_train_config_is_rejected() {
    let (vocab, data) = corpus(20, 5);
    let state = ModelState::init(smoke_config(&vocab)).unwrap();
    let ids = SpecialIds::from(&vocab);
    let bad_rate = TrainConfig {
        mask_rate: 1.5,
        ..smoke_train_config()
    };
    assert!(train(state.clone(), &data, &data, ids, &bad_rate).is_err());
    let tiny_batch = TrainConfig {
        batch_tokens: 2,
        ..smoke_train_config()
    };
    assert!(train(state, &data, &data, ids, &tiny_batch).is_err());
}

#[test]
fn perplexity_identities() {
    let (vocab, data) = corpus(40, 6);
    let ids = SpecialIds::from(&vocab);
    for mode in [PplMode::Pooled, PplMode::PerSentence] {
        let v = vocab.len() as f64;
        let ppl = mlm_perplexity(
            &UniformScorer {
                vocab_size: vocab.len(),
            },
            &data,
            0.3,
            9,
            ids,
            mode,
        )
        .unwrap();
        assert!((ppl - v).abs() <= 1e-12 * v, "{mode:?}: {ppl}");
        let ppl = mlm_perplexity(&PerfectScorer, &data, 0.3, 9, ids, mode).unwrap();
        assert_eq!(ppl, 1.0);
    }
    assert!(mlm_perplexity(&PerfectScorer, &data, 0.0, 9, ids, PplMode::Pooled).is_err());
    assert!(mlm_perplexity(&PerfectScorer, &[], 0.3, 9, ids, PplMode::Pooled).is_err());
}

/// Scores every target with probability 1/e.
struct InverseE;

impl MaskedScorer for InverseE {
    fn target_log_probs(&self, s: &structformer::training::MaskedSentence) -> Result<Vec<f64>> {
        Ok(vec![-1.0; s.positions.len()])
    }
}

#[test]
fn single_token_with_probability_inverse_e() {
    let ids = SpecialIds { pad: 1, mask: 2 };
    let ppl = mlm_perplexity(&InverseE, &[vec![7]], 1.0, 0, ids, PplMode::Pooled).unwrap();
    assert_eq!(ppl, std::f64::consts::E);
}

#[test]
fn pooled_and_per_sentence_agree_on_single_sentences() {
    let (vocab, data) = corpus(10, 7);
    let state = ModelState::init(smoke_config(&vocab)).unwrap();
    let ids = SpecialIds::from(&vocab);
    for sent in data.iter().take(5) {
        let one = std::slice::from_ref(sent);
        let a = mlm_perplexity(&state, one, 0.5, 2, ids, PplMode::Pooled).unwrap();
        let b = mlm_perplexity(&state, one, 0.5, 2, ids, PplMode::PerSentence).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn perplexity_is_exp_of_pooled_loss() {
    let (vocab, data) = corpus(30, 8);
    let state = ModelState::init(smoke_config(&vocab)).unwrap();
    let ids = SpecialIds::from(&vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let batch = mask_batch(&data, 0.4, ids, &mut rng);
    let logits: Vec<_> = batch
        .sentences
        .iter()
        .map(|s| {
            structformer::model::encoder_forward(&s.input, &s.pad_mask, &state)
                .unwrap()
                .logits
        })
        .collect();
    let loss = mlm_loss(&logits, &batch).unwrap();
    let ppl = mlm_perplexity(&state, &data, 0.4, 21, ids, PplMode::Pooled).unwrap();
    assert!((ppl - loss.exp()).abs() <= 1e-12 * ppl);
}
