//! Parameter layout shared by concrete tensors, tape variables and gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Positional};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norm<T> {
    pub gain: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub attn_norm: Norm<T>,
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub attn_out: Linear<T>,
    /// heads × 2 pre-softmax (w_parent, w_child); unused by softmax blocks.
    pub relation: T,
    pub ff_norm: Norm<T>,
    pub ff_in: Linear<T>,
    pub ff_out: Linear<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parser<T> {
    pub conv: Vec<Linear<T>>,
    pub distance_hidden: Linear<T>,
    pub distance_out: Linear<T>,
    pub height_hidden: Linear<T>,
    pub height_out: Linear<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub embedding: T,
    pub position: Option<T>,
    pub blocks: Vec<Block<T>>,
    pub parser: Parser<T>,
    /// 1×2 raw (μ1, μ2); the temperatures are `exp` of these.
    pub temperatures: T,
    pub final_norm: Norm<T>,
    /// Absent when the output projection is tied to the embedding table.
    pub output: Option<T>,
    pub output_bias: T,
}

impl<T> Linear<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Linear<U> {
        Linear {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }
}

impl<T> Norm<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Norm<U> {
        Norm {
            gain: f(&self.gain),
            bias: f(&self.bias),
        }
    }
}

macro_rules! visit_linear {
    ($out:ident, $prefix:expr, $lin:expr) => {
        let Linear { weight, bias } = $lin;
        $out.push((format!("{}.weight", $prefix), weight));
        $out.push((format!("{}.bias", $prefix), bias));
    };
}

macro_rules! visit_norm {
    ($out:ident, $prefix:expr, $norm:expr) => {
        let Norm { gain, bias } = $norm;
        $out.push((format!("{}.gain", $prefix), gain));
        $out.push((format!("{}.bias", $prefix), bias));
    };
}

impl<T> Params<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Params<U> {
        let f = &mut f;
        Params {
            embedding: f(&self.embedding),
            position: self.position.as_ref().map(&mut *f),
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    attn_norm: b.attn_norm.map(f),
                    query: b.query.map(f),
                    key: b.key.map(f),
                    value: b.value.map(f),
                    attn_out: b.attn_out.map(f),
                    relation: f(&b.relation),
                    ff_norm: b.ff_norm.map(f),
                    ff_in: b.ff_in.map(f),
                    ff_out: b.ff_out.map(f),
                })
                .collect(),
            parser: Parser {
                conv: self.parser.conv.iter().map(|c| c.map(f)).collect(),
                distance_hidden: self.parser.distance_hidden.map(f),
                distance_out: self.parser.distance_out.map(f),
                height_hidden: self.parser.height_hidden.map(f),
                height_out: self.parser.height_out.map(f),
            },
            temperatures: f(&self.temperatures),
            final_norm: self.final_norm.map(f),
            output: self.output.as_ref().map(&mut *f),
            output_bias: f(&self.output_bias),
        }
    }

    /// Every parameter with a stable dotted name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out: Vec<(String, &T)> = Vec::new();
        out.push(("embedding".into(), &self.embedding));
        if let Some(p) = &self.position {
            out.push(("position".into(), p));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            visit_norm!(out, format!("blocks.{k}.attn_norm"), &b.attn_norm);
            visit_linear!(out, format!("blocks.{k}.query"), &b.query);
            visit_linear!(out, format!("blocks.{k}.key"), &b.key);
            visit_linear!(out, format!("blocks.{k}.value"), &b.value);
            visit_linear!(out, format!("blocks.{k}.attn_out"), &b.attn_out);
            out.push((format!("blocks.{k}.relation"), &b.relation));
            visit_norm!(out, format!("blocks.{k}.ff_norm"), &b.ff_norm);
            visit_linear!(out, format!("blocks.{k}.ff_in"), &b.ff_in);
            visit_linear!(out, format!("blocks.{k}.ff_out"), &b.ff_out);
        }
        let p = &self.parser;
        for (k, c) in p.conv.iter().enumerate() {
            visit_linear!(out, format!("parser.conv.{k}"), c);
        }
        visit_linear!(out, "parser.distance_hidden", &p.distance_hidden);
        visit_linear!(out, "parser.distance_out", &p.distance_out);
        visit_linear!(out, "parser.height_hidden", &p.height_hidden);
        visit_linear!(out, "parser.height_out", &p.height_out);
        out.push(("temperatures".into(), &self.temperatures));
        visit_norm!(out, "final_norm", &self.final_norm);
        if let Some(o) = &self.output {
            out.push(("output".into(), o));
        }
        out.push(("output_bias".into(), &self.output_bias));
        out
    }

    /// Same order as [`Params::named`].
    pub fn named_mut(&mut self) -> Vec<(String, &mut T)> {
        let mut out: Vec<(String, &mut T)> = Vec::new();
        out.push(("embedding".into(), &mut self.embedding));
        if let Some(p) = &mut self.position {
            out.push(("position".into(), p));
        }
        for (k, b) in self.blocks.iter_mut().enumerate() {
            visit_norm!(out, format!("blocks.{k}.attn_norm"), &mut b.attn_norm);
            visit_linear!(out, format!("blocks.{k}.query"), &mut b.query);
            visit_linear!(out, format!("blocks.{k}.key"), &mut b.key);
            visit_linear!(out, format!("blocks.{k}.value"), &mut b.value);
            visit_linear!(out, format!("blocks.{k}.attn_out"), &mut b.attn_out);
            out.push((format!("blocks.{k}.relation"), &mut b.relation));
            visit_norm!(out, format!("blocks.{k}.ff_norm"), &mut b.ff_norm);
            visit_linear!(out, format!("blocks.{k}.ff_in"), &mut b.ff_in);
            visit_linear!(out, format!("blocks.{k}.ff_out"), &mut b.ff_out);
        }
        let p = &mut self.parser;
        for (k, c) in p.conv.iter_mut().enumerate() {
            visit_linear!(out, format!("parser.conv.{k}"), c);
        }
        visit_linear!(out, "parser.distance_hidden", &mut p.distance_hidden);
        visit_linear!(out, "parser.distance_out", &mut p.distance_out);
        visit_linear!(out, "parser.height_hidden", &mut p.height_hidden);
        visit_linear!(out, "parser.height_out", &mut p.height_out);
        out.push(("temperatures".into(), &mut self.temperatures));
        visit_norm!(out, "final_norm", &mut self.final_norm);
        if let Some(o) = &mut self.output {
            out.push(("output".into(), o));
        }
        out.push(("output_bias".into(), &mut self.output_bias));
        out
    }
}

impl Params<Tensor> {
    /// Zero-filled parameters with the shapes `config` implies.
    pub fn zeros(config: &ModelConfig) -> Self {
        let d = config.d_model;
        let lin = |i: usize, o: usize| Linear {
            weight: Tensor::zeros(i, o),
            bias: Tensor::zeros(1, o),
        };
        let norm = || Norm {
            gain: Tensor::filled(1, d, 1.0),
            bias: Tensor::zeros(1, d),
        };
        Params {
            embedding: Tensor::zeros(config.vocab_size, d),
            position: match config.positional {
                Positional::Learned => Some(Tensor::zeros(config.max_seq_len, d)),
                _ => None,
            },
            blocks: (0..config.layers)
                .map(|_| Block {
                    attn_norm: norm(),
                    query: lin(d, d),
                    key: lin(d, d),
                    value: lin(d, d),
                    attn_out: lin(d, d),
                    relation: Tensor::zeros(config.heads, 2),
                    ff_norm: norm(),
                    ff_in: lin(d, config.d_ff),
                    ff_out: lin(config.d_ff, d),
                })
                .collect(),
            parser: Parser {
                conv: (0..config.parser_layers)
                    .map(|_| lin(config.conv_kernel * d, d))
                    .collect(),
                distance_hidden: lin(2 * d, d),
                distance_out: lin(d, 1),
                height_hidden: lin(d, d),
                height_out: lin(d, 1),
            },
            temperatures: Tensor::zeros(1, 2),
            final_norm: norm(),
            output: (!config.tie_output).then(|| Tensor::zeros(d, config.vocab_size)),
            output_bias: Tensor::zeros(1, config.vocab_size),
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.all_finite())
    }
}

fn is_weight_matrix(name: &str) -> bool {
    name.ends_with(".weight") || name == "embedding" || name == "position" || name == "output"
}

/// Deterministic initialization: scaled uniform matrices, zero biases,
/// unit norm gains, zero relation weights and zero raw temperatures.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<Params<Tensor>> {
    config.validate()?;
    let mut params = Params::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in params.named_mut() {
        if is_weight_matrix(&name) {
            let bound = (6.0 / (t.rows + t.cols) as f64).sqrt();
            for v in &mut t.data {
                *v = rng.gen_range(-bound..bound);
            }
        }
    }
    Ok(params)
}
