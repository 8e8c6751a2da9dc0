use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positional {
    Sinusoidal,
    Learned,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    StructFormer,
    Vanilla,
}

/// Encoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub parser_layers: usize,
    pub conv_kernel: usize,
    /// Number of standard blocks before the parser network.
    pub parser_position: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub seed: u64,
    pub positional: Positional,
    pub tie_output: bool,
    pub arch: Arch,
}

impl ModelConfig {
    /// Small CPU-friendly profile.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            layers: 2,
            heads: 2,
            d_model: 64,
            d_ff: 128,
            dropout: 0.0,
            parser_layers: 1,
            conv_kernel: 5,
            parser_position: 0,
            vocab_size,
            max_seq_len: 128,
            seed: 0,
            positional: Positional::Sinusoidal,
            tie_output: false,
            arch: Arch::StructFormer,
        }
    }

    /// Full-size profile with the published hyperparameters.
    pub fn paper(vocab_size: usize) -> Self {
        ModelConfig {
            layers: 8,
            heads: 8,
            d_model: 512,
            d_ff: 2048,
            dropout: 0.1,
            parser_layers: 3,
            conv_kernel: 5,
            parser_position: 0,
            vocab_size,
            max_seq_len: 256,
            seed: 0,
            positional: Positional::Sinusoidal,
            tie_output: false,
            arch: Arch::StructFormer,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.heads) {
            return bad(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            ));
        }
        if self.parser_position > self.layers {
            return bad(format!(
                "parser position {} exceeds layer count {}",
                self.parser_position, self.layers
            ));
        }
        if self.conv_kernel == 0 || self.conv_kernel.is_multiple_of(2) {
            return bad(format!("conv kernel {} must be odd", self.conv_kernel));
        }
        if self.d_ff == 0 || self.vocab_size == 0 || self.max_seq_len == 0 {
            return bad("d_ff, vocab_size and max_seq_len must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}
