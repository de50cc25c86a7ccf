//! Expected Hamming distance between posterior vectors and the N-pair
//! contrastive loss built on it.
//!
//! With independent bits, `E[d] = sum_j q_j (1 - q'_j) + (1 - q_j) q'_j`.
//! A batch holds one (anchor, positive) pair per class; the loss is
//!
//! ```text
//! L = sum_i { e(a_i, p_i)^2 + sum_{r != i} max(n/2 - e(a_i, p_r), 0)^2 }
//! ```
//!
//! It has no weights to tune: its only inputs are the posteriors and `n`.

use crate::error::{PdhError, Result};
use crate::model::PosteriorVector;

/// One anchor and one positive posterior per class, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub anchors: Vec<PosteriorVector>,
    pub positives: Vec<PosteriorVector>,
}

/// `dL/dx` for every anchor and positive, index-aligned with the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
}

impl PairBatch {
    pub fn new(anchors: Vec<PosteriorVector>, positives: Vec<PosteriorVector>) -> Result<Self> {
        let batch = Self { anchors, positives };
        batch.check(None)?;
        Ok(batch)
    }

    pub fn num_classes(&self) -> usize {
        self.anchors.len()
    }

    fn check(&self, bits: Option<usize>) -> Result<usize> {
        if self.anchors.is_empty() {
            return Err(PdhError::EmptyBatch);
        }
        if self.anchors.len() != self.positives.len() {
            return Err(PdhError::LengthMismatch { left: self.anchors.len(), right: self.positives.len() });
        }
        let n = bits.unwrap_or(self.anchors[0].len());
        for q in self.anchors.iter().chain(&self.positives) {
            if q.len() != n {
                return Err(PdhError::LengthMismatch { left: q.len(), right: n });
            }
        }
        Ok(n)
    }
}

/// Expected number of disagreeing bits under independent Bernoulli bits.
pub fn expected_hamming(q: &PosteriorVector, q2: &PosteriorVector) -> Result<f64> {
    if q.len() != q2.len() {
        return Err(PdhError::LengthMismatch { left: q.len(), right: q2.len() });
    }
    Ok(q.0.iter().zip(&q2.0).map(|(&a, &b)| a * (1.0 - b) + (1.0 - a) * b).sum())
}

pub fn npair_contrastive_loss(batch: &PairBatch, n: usize) -> Result<f64> {
    batch.check(Some(n))?;
    let half = n as f64 / 2.0;
    let mut total = 0.0;
    for (i, anchor) in batch.anchors.iter().enumerate() {
        let within = expected_hamming(anchor, &batch.positives[i])?;
        total += within * within;
        for (r, positive) in batch.positives.iter().enumerate() {
            if r == i {
                continue;
            }
            let gap = (half - expected_hamming(anchor, positive)?).max(0.0);
            total += gap * gap;
        }
    }
    Ok(total)
}

/// `dL/dq` for every posterior in the batch.
pub fn loss_grad_wrt_posteriors(batch: &PairBatch, n: usize) -> Result<PairGradients> {
    batch.check(Some(n))?;
    let half = n as f64 / 2.0;
    let nc = batch.num_classes();
    let mut ga = vec![vec![0.0; n]; nc];
    let mut gp = vec![vec![0.0; n]; nc];
    for i in 0..nc {
        let a = &batch.anchors[i].0;
        for r in 0..nc {
            let p = &batch.positives[r].0;
            let e = expected_hamming(&batch.anchors[i], &batch.positives[r])?;
            let de = if r == i {
                2.0 * e
            } else {
                let gap = half - e;
                // hinge is inactive at gap == 0
                if gap > 0.0 {
                    -2.0 * gap
                } else {
                    continue;
                }
            };
            // de/da_j = 1 - 2 p_j, de/dp_j = 1 - 2 a_j
            for j in 0..n {
                ga[i][j] += de * (1.0 - 2.0 * p[j]);
                gp[r][j] += de * (1.0 - 2.0 * a[j]);
            }
        }
    }
    Ok(PairGradients { anchors: ga, positives: gp })
}

/// `dL/dx` through `q = 1 / (1 + e^x)`, i.e. `dq/dx = -q (1 - q)`.
pub fn loss_grad_wrt_logits(batch: &PairBatch, n: usize) -> Result<PairGradients> {
    let mut g = loss_grad_wrt_posteriors(batch, n)?;
    let chain = |grads: &mut [Vec<f64>], qs: &[PosteriorVector]| {
        for (gv, q) in grads.iter_mut().zip(qs) {
            for (gj, &qj) in gv.iter_mut().zip(&q.0) {
                *gj *= -qj * (1.0 - qj);
            }
        }
    };
    chain(&mut g.anchors, &batch.anchors);
    chain(&mut g.positives, &batch.positives);
    Ok(g)
}

/// Which cross-class hinges are active (`n/2 - e > 0`), row-major over
/// `(anchor i, positive r != i)`. Used to detect hinge kinks in gradient checks.
pub fn active_hinges(batch: &PairBatch, n: usize) -> Result<Vec<bool>> {
    batch.check(Some(n))?;
    let half = n as f64 / 2.0;
    let mut out = Vec::new();
    for (i, a) in batch.anchors.iter().enumerate() {
        for (r, p) in batch.positives.iter().enumerate() {
            if r != i {
                out.push(half - expected_hamming(a, p)? > 0.0);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{posteriors, LogitVector};
    use crate::numerics::{finite_diff_gradient, relative_error, Rng};
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> PosteriorVector {
        PosteriorVector(v.to_vec())
    }

    #[test]
    fn expected_hamming_examples() {
        let b = pv(&[1.0, 0.0, 1.0]);
        assert_eq!(expected_hamming(&b, &b).unwrap(), 0.0);
        let half = pv(&[0.5; 4]);
        assert_eq!(expected_hamming(&half, &pv(&[0.1, 0.9, 0.3, 1.0])).unwrap(), 2.0);
        // enumerate the four joint outcomes of (b, b') ~ (Bern(0.8), Bern(0.3))
        let mut by_enumeration = 0.0;
        for b1 in [0u8, 1] {
            for b2 in [0u8, 1] {
                let p1 = if b1 == 1 { 0.8 } else { 0.2 };
                let p2 = if b2 == 1 { 0.3 } else { 0.7 };
                by_enumeration += p1 * p2 * f64::from(b1 != b2);
            }
        }
        let e = expected_hamming(&pv(&[0.8]), &pv(&[0.3])).unwrap();
        assert!((e - by_enumeration).abs() < 1e-15);
        assert!((e - 0.62).abs() < 1e-15);
        assert!(expected_hamming(&pv(&[0.1]), &pv(&[0.1, 0.2])).is_err());
    }

    #[test]
    fn loss_examples() {
        let ideal = PairBatch::new(
            vec![pv(&[1.0, 1.0]), pv(&[0.0, 0.0])],
            vec![pv(&[1.0, 1.0]), pv(&[0.0, 0.0])],
        )
        .unwrap();
        assert_eq!(npair_contrastive_loss(&ideal, 2).unwrap(), 0.0);

        let half = PairBatch::new(vec![pv(&[0.5, 0.5]); 2], vec![pv(&[0.5, 0.5]); 2]).unwrap();
        assert_eq!(npair_contrastive_loss(&half, 2).unwrap(), 2.0);

        let ones = PairBatch::new(vec![pv(&[1.0, 1.0]); 2], vec![pv(&[1.0, 1.0]); 2]).unwrap();
        assert_eq!(npair_contrastive_loss(&ones, 2).unwrap(), 2.0);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let empty = PairBatch { anchors: vec![], positives: vec![] };
        assert!(matches!(npair_contrastive_loss(&empty, 2), Err(PdhError::EmptyBatch)));
        assert!(PairBatch::new(vec![], vec![]).is_err());
    }

    #[test]
    fn ideal_configuration_has_zero_gradient() {
        let batch = PairBatch::new(
            vec![pv(&[1.0, 1.0, 0.0, 0.0]), pv(&[0.0, 0.0, 1.0, 1.0])],
            vec![pv(&[1.0, 1.0, 0.0, 0.0]), pv(&[0.0, 0.0, 1.0, 1.0])],
        )
        .unwrap();
        let g = loss_grad_wrt_logits(&batch, 4).unwrap();
        assert!(g.anchors.iter().chain(&g.positives).flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn single_class_hand_chain_rule() {
        let batch = PairBatch::new(vec![pv(&[0.8])], vec![pv(&[0.3])]).unwrap();
        let g = loss_grad_wrt_posteriors(&batch, 1).unwrap();
        assert!((g.anchors[0][0] - 0.496).abs() < 1e-12);
        // dL/dq' = 2 e (1 - 2 q) = 2 * 0.62 * (1 - 1.6)
        assert!((g.positives[0][0] - 2.0 * 0.62 * -0.6).abs() < 1e-12);
    }

    #[test]
    fn hinge_at_boundary_has_zero_gradient() {
        // cross distance exactly n/2: the hinge contributes nothing
        let batch = PairBatch::new(vec![pv(&[1.0, 1.0]), pv(&[1.0, 0.0])], vec![pv(&[1.0, 1.0]), pv(&[1.0, 0.0])]).unwrap();
        let g = loss_grad_wrt_posteriors(&batch, 2).unwrap();
        assert!(g.anchors.iter().chain(&g.positives).flatten().all(|&v| v == 0.0));
        assert_eq!(npair_contrastive_loss(&batch, 2).unwrap(), 0.0);
    }

    fn batch_from_logits(xs: &[f64], nc: usize, n: usize) -> PairBatch {
        let post = |k: usize| posteriors(&LogitVector(xs[k * n..(k + 1) * n].to_vec()));
        PairBatch::new((0..nc).map(post).collect(), (nc..2 * nc).map(post).collect()).unwrap()
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let mut rng = Rng::new(21);
        let mut checked = 0;
        while checked < 200 {
            let nc = 1 + rng.below(4) as usize;
            let n = 1 + rng.below(8) as usize;
            let xs: Vec<f64> = (0..2 * nc * n).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let batch = batch_from_logits(&xs, nc, n);
            let hinges = active_hinges(&batch, n).unwrap();
            let analytic = loss_grad_wrt_logits(&batch, n).unwrap();
            let flat: Vec<f64> = analytic.anchors.iter().chain(&analytic.positives).flatten().copied().collect();
            let numeric = finite_diff_gradient(
                |x| npair_contrastive_loss(&batch_from_logits(x, nc, n), n).unwrap(),
                &xs,
                1e-5,
            )
            .unwrap();
            // skip draws where a perturbation would flip a hinge
            let stable = (0..xs.len()).all(|k| {
                [1e-5, -1e-5].iter().all(|h| {
                    let mut p = xs.clone();
                    p[k] += h;
                    active_hinges(&batch_from_logits(&p, nc, n), n).unwrap() == hinges
                })
            });
            if !stable {
                continue;
            }
            for (a, b) in flat.iter().zip(&numeric) {
                assert!(relative_error(*a, *b) < 1e-4, "{a} vs {b}");
            }
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn expected_hamming_symmetry_and_range(
            pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..64)
        ) {
            let q = PosteriorVector(pairs.iter().map(|p| p.0).collect());
            let q2 = PosteriorVector(pairs.iter().map(|p| p.1).collect());
            let e = expected_hamming(&q, &q2).unwrap();
            prop_assert_eq!(e, expected_hamming(&q2, &q).unwrap());
            prop_assert!(e >= 0.0 && e <= q.len() as f64 + 1e-12);
            let self_e = expected_hamming(&q, &q).unwrap();
            let closed = 2.0 * q.0.iter().map(|v| v * (1.0 - v)).sum::<f64>();
            prop_assert!((self_e - closed).abs() < 1e-12);
        }

        #[test]
        fn loss_is_nonnegative(
            vals in proptest::collection::vec(0.0f64..=1.0, 12),
        ) {
            let n = 3;
            let pv = |k: usize| PosteriorVector(vals[k * n..(k + 1) * n].to_vec());
            let batch = PairBatch::new(vec![pv(0), pv(1)], vec![pv(2), pv(3)]).unwrap();
            prop_assert!(npair_contrastive_loss(&batch, n).unwrap() >= 0.0);
        }
    }
}
