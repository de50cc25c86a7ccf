//! Gaussian class blobs: a desk-scale labelled dataset whose generating
//! densities are known exactly.
//!
//! Class `i` has centre `spread * (cos 2πi/C, sin 2πi/C, 0, ...)` (or
//! `spread * i` on a line when `dim == 1`) and isotropic unit-variance noise.
//! Sample values are rounded to `f32` so that a dataset written to disk and
//! read back is identical to the in-memory one.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::error::{PdhError, Result};
use crate::model::InputShape;
use crate::numerics::Rng;
use crate::oracle::DiscreteWorld;
use crate::trainer::LabeledDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub spread: f64,
    pub sigma: f64,
}

impl BlobSpec {
    pub fn new(classes: usize, per_class: usize, dim: usize, spread: f64) -> Result<Self> {
        let spec = Self { classes, per_class, dim, spread, sigma: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(PdhError::InvalidArgument(format!("need >= 2 classes, got {}", self.classes)));
        }
        if self.classes > u16::MAX as usize + 1 {
            return Err(PdhError::InvalidArgument("too many classes for u16 labels".into()));
        }
        if self.per_class < 2 {
            return Err(PdhError::InvalidArgument(format!(
                "need >= 2 samples per class to form pairs, got {}",
                self.per_class
            )));
        }
        if self.dim == 0 {
            return Err(PdhError::InvalidArgument("dim must be >= 1".into()));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0 && self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(PdhError::InvalidArgument("spread must be >= 0 and sigma > 0".into()));
        }
        Ok(())
    }

    pub fn center(&self, class: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        if self.dim == 1 {
            c[0] = self.spread * class as f64;
        } else {
            let angle = TAU * class as f64 / self.classes as f64;
            c[0] = self.spread * angle.cos();
            c[1] = self.spread * angle.sin();
        }
        c
    }

    /// Samples are interleaved by class: sample `k` has label `k % classes`.
    pub fn generate(&self, rng: &mut Rng) -> Result<LabeledDataset> {
        self.validate()?;
        let centers: Vec<Vec<f64>> = (0..self.classes).map(|i| self.center(i)).collect();
        let total = self.classes * self.per_class;
        let mut images = Vec::with_capacity(total * self.dim);
        let mut labels = Vec::with_capacity(total);
        for k in 0..total {
            let class = k % self.classes;
            for &c in &centers[class] {
                images.push((c + self.sigma * rng.normal()) as f32 as f64);
            }
            labels.push(class as u16);
        }
        LabeledDataset::new(InputShape::Flat(self.dim), self.classes, images, labels)
    }

    /// Generating parameters as `key=value` lines; `center_<i>` holds
    /// comma-separated coordinates.
    pub fn describe(&self, seed: u64) -> String {
        let mut s = String::new();
        writeln!(s, "model=gaussian_blobs").unwrap();
        writeln!(s, "classes={}", self.classes).unwrap();
        writeln!(s, "per_class={}", self.per_class).unwrap();
        writeln!(s, "dim={}", self.dim).unwrap();
        writeln!(s, "spread={}", self.spread).unwrap();
        writeln!(s, "sigma={}", self.sigma).unwrap();
        writeln!(s, "class_prior=uniform").unwrap();
        writeln!(s, "seed={seed}").unwrap();
        for i in 0..self.classes {
            let coords: Vec<String> = self.center(i).iter().map(|v| v.to_string()).collect();
            writeln!(s, "center_{i}={}", coords.join(",")).unwrap();
        }
        s
    }

    /// Restricts the class densities to a finite point set: `D_i(p)` is the
    /// Gaussian density of class `i` at `p`, renormalised over `points`.
    pub fn discrete_world(&self, points: &[Vec<f64>]) -> Result<DiscreteWorld> {
        let tables = (0..self.classes)
            .map(|i| {
                let c = self.center(i);
                let logs: Vec<f64> = points
                    .iter()
                    .map(|p| {
                        let d2: f64 = p.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                        -d2 / (2.0 * self.sigma * self.sigma)
                    })
                    .collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = w.iter().sum();
                w.iter().map(|v| v / total).collect()
            })
            .collect();
        DiscreteWorld::new(tables)
    }
}
