//! The likelihood estimator.
//!
//! A small feed-forward network maps an input sample to one log-likelihood
//! ratio per bit. The head is linear and unconstrained; bit posteriors are
//! obtained with [`posteriors`], which applies `1 / (1 + e^x)` elementwise.
//! Backpropagation is written out per layer type.

mod checkpoint;
mod config;
mod net;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{InputShape, Layer, ModelConfig};
pub use net::{backward, backward_accumulate, forward, init_params, logits, ForwardTrace, Parameters};

use crate::numerics::stable_sigmoid;

/// Per-bit log-likelihood ratios `x_j = log Pr(p | h_j = 0) / Pr(p | h_j = 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(pub Vec<f64>);

/// Per-bit posteriors `q_j = Pr(h_j = 1 | p)`, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector(pub Vec<f64>);

impl LogitVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl PosteriorVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Elementwise `q_j = 1 / (1 + e^{x_j})`. `q_j >= 0.5` exactly when `x_j <= 0`.
pub fn posteriors(x: &LogitVector) -> PosteriorVector {
    PosteriorVector(x.0.iter().map(|&v| stable_sigmoid(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posterior_examples() {
        let q = posteriors(&LogitVector(vec![0.0, 3f64.ln(), -(3f64.ln())]));
        assert_eq!(q.0[0], 0.5);
        assert!((q.0[1] - 0.25).abs() < 1e-15);
        assert!((q.0[2] - 0.75).abs() < 1e-15);
    }
}
