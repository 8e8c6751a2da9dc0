use serde::{Deserialize, Serialize};

use crate::model::{Params, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub warmup_steps: usize,
    /// Global gradient-norm clip; disabled when absent.
    pub grad_clip: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            warmup_steps: 200,
            grad_clip: None,
        }
    }
}

impl AdamConfig {
    /// Linear warmup to `lr`, then decay with `1/sqrt(step)`.
    pub fn learning_rate(&self, step: usize) -> f64 {
        let s = step.max(1) as f64;
        if self.warmup_steps == 0 {
            return self.lr;
        }
        let w = self.warmup_steps as f64;
        self.lr * (s / w).min((w / s).sqrt())
    }
}

/// Adam moments for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: usize,
    m: Params<Tensor>,
    v: Params<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &Params<Tensor>) -> Self {
        let zeros = params.map(|t| Tensor::zeros(t.rows, t.cols));
        Adam {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update; returns the gradient norm before clipping.
    pub fn update(&mut self, params: &mut Params<Tensor>, grads: &Params<Tensor>) -> f64 {
        self.step += 1;
        let c = &self.config;
        let norm = grads
            .named()
            .iter()
            .map(|(_, g)| g.sum_sq())
            .sum::<f64>()
            .sqrt();
        let scale = match c.grad_clip {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        let lr = c.learning_rate(self.step);
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let slots = params
            .named_mut()
            .into_iter()
            .zip(self.m.named_mut())
            .zip(self.v.named_mut())
            .zip(grads.named());
        for ((((_, p), (_, m)), (_, v)), (_, g)) in slots {
            for k in 0..p.data.len() {
                let gk = g.data[k] * scale;
                m.data[k] = c.beta1 * m.data[k] + (1.0 - c.beta1) * gk;
                v.data[k] = c.beta2 * v.data[k] + (1.0 - c.beta2) * gk * gk;
                let mh = m.data[k] / bc1;
                let vh = v.data[k] / bc2;
                p.data[k] -= lr * mh / (vh.sqrt() + c.eps);
            }
        }
        norm
    }
}
