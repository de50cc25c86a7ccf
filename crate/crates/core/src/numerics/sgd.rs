use crate::error::{PdhError, Result};
use crate::numerics::Matrix;

/// Plain SGD with classical momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        let cfg = Self { learning_rate, momentum };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `learning_rate` must be finite and non-negative (zero freezes the
    /// parameters), `momentum` in `[0, 1)`.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(PdhError::InvalidConfig(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(PdhError::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// One update: `v <- momentum * v - lr * g; p <- p + v`.
pub fn sgd_step(
    params: &mut [Matrix],
    grads: &[Matrix],
    cfg: &SgdConfig,
    velocity: &mut [Matrix],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(PdhError::DimensionMismatch(format!(
            "{} params, {} grads, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for (i, ((p, g), v)) in params.iter().zip(grads).zip(velocity.iter()).enumerate() {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(PdhError::DimensionMismatch(format!(
                "tensor {i}: param {:?}, grad {:?}, velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            )));
        }
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        for ((pv, &gv), vv) in p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(v.as_mut_slice().iter_mut())
        {
            *vv = cfg.momentum * *vv - cfg.learning_rate * gv;
            *pv += *vv;
        }
    }
    Ok(())
}
