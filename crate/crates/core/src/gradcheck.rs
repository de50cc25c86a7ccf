//! Finite-difference verification of the hand-written backward passes.
//!
//! Probed coordinates are perturbed by `±h`; a probe is discarded when either
//! perturbation changes the ReLU/max-pool activation pattern or the set of
//! active loss hinges, since the objective is not differentiable across
//! those boundaries.
//!
//! The full loss is a sum of many squared terms, tens in magnitude, while
//! some coordinates have gradients near 1e-6. There the `f64` difference
//! quotient carries rounding noise of about `eps * |L| / h`, which can exceed
//! the tolerance by itself. [`check_loss_gradients_refined`] lets the caller
//! re-evaluate such probes with a more precise implementation of the same
//! central difference.

use crate::error::Result;
use crate::loss::{active_hinges, npair_contrastive_loss, PairBatch};
use crate::model::{backward, forward, init_params, posteriors, InputShape, ModelConfig, Parameters};
use crate::numerics::{finite_diff_partial, relative_error, Rng};
use crate::trainer::batch_loss_and_grads;

pub const FD_STEP: f64 = 1e-5;
/// Relative error above which a probe is handed to the refiner.
pub const REFINE_ABOVE: f64 = 1e-4;

/// Recomputes `dL/dtheta_c` by central differences with step `h` for the
/// given parameters and batch: `(params, anchors, positives, c, h)`.
pub type Refiner<'a> = &'a dyn Fn(&Parameters, &[Vec<f64>], &[Vec<f64>], usize, f64) -> Result<f64>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub configurations: usize,
    pub coords_checked: usize,
    pub coords_skipped: usize,
    pub max_rel_err: f64,
    /// `(analytic, numeric)` at the worst coordinate.
    pub worst: Option<(f64, f64)>,
    /// Probes whose `f64` estimate was replaced by the refiner.
    pub coords_refined: usize,
    /// Largest relative error of the plain `f64` estimates, before refinement.
    pub max_rel_err_f64: f64,
}

impl GradCheckReport {
    fn record_refined(&mut self, analytic: f64, numeric: f64) {
        self.coords_checked += 1;
        let err = relative_error(analytic, numeric);
        if err > self.max_rel_err || self.worst.is_none() {
            self.max_rel_err = err.max(self.max_rel_err);
            self.worst = Some((analytic, numeric));
        }
    }

    fn merge(&mut self, other: GradCheckReport) {
        self.configurations += other.configurations;
        self.coords_checked += other.coords_checked;
        self.coords_skipped += other.coords_skipped;
        self.coords_refined += other.coords_refined;
        self.max_rel_err_f64 = self.max_rel_err_f64.max(other.max_rel_err_f64);
        if other.max_rel_err >= self.max_rel_err && other.worst.is_some() {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst;
        }
    }
}

fn random_input(shape: InputShape, rng: &mut Rng) -> Vec<f64> {
    match shape {
        InputShape::Flat(m) => (0..m).map(|_| rng.normal()).collect(),
        InputShape::Image { .. } => (0..shape.numel()).map(|_| rng.next_f64()).collect(),
    }
}

/// Initialised weights plus small random biases, so every parameter matters.
fn random_params(cfg: &ModelConfig, rng: &mut Rng) -> Result<Parameters> {
    let mut params = init_params(cfg, rng)?;
    for (i, t) in params.tensors_mut().iter_mut().enumerate() {
        if i % 2 == 1 {
            for v in t.as_mut_slice() {
                *v = rng.uniform(-0.1, 0.1);
            }
        }
    }
    Ok(params)
}

/// Picks `per_tensor` random coordinates from every tensor, as flat indices.
fn pick_coords(params: &Parameters, per_tensor: usize, rng: &mut Rng) -> Vec<usize> {
    let mut coords = Vec::new();
    let mut offset = 0;
    for t in params.tensors() {
        let take = per_tensor.min(t.len());
        coords.extend(rng.sample_distinct(t.len(), take).into_iter().map(|c| offset + c));
        offset += t.len();
    }
    coords
}

fn loss_and_pattern(params: &Parameters, anchors: &[Vec<f64>], positives: &[Vec<f64>]) -> Result<(f64, Vec<usize>)> {
    let n = params.config().code_bits;
    let mut pattern = Vec::new();
    let mut qs = Vec::new();
    for input in anchors.iter().chain(positives) {
        let (x, trace) = forward(params, input)?;
        pattern.extend(trace.activation_pattern());
        qs.push(posteriors(&x));
    }
    let pos = qs.split_off(anchors.len());
    let batch = PairBatch::new(qs, pos)?;
    pattern.extend(active_hinges(&batch, n)?.into_iter().map(usize::from));
    Ok((npair_contrastive_loss(&batch, n)?, pattern))
}

/// Central difference at coordinate `c` through [`finite_diff_partial`],
/// recording it unless a perturbation crosses a kink. Estimates off by more
/// than `REFINE_ABOVE` go through `refine` when one is given.
#[allow(clippy::too_many_arguments)]
fn probe_coordinate<F>(
    params: &Parameters,
    flat: &[f64],
    c: usize,
    base_pattern: &[usize],
    analytic: f64,
    objective: &mut F,
    refine: Option<&mut dyn FnMut(usize) -> Result<f64>>,
    report: &mut GradCheckReport,
) -> Result<()>
where
    F: FnMut(&Parameters) -> Result<(f64, Vec<usize>)>,
{
    let mut crossed = false;
    let mut f = |x: &[f64]| match params.with_flat(x).and_then(|p| objective(&p)) {
        Ok((value, pattern)) => {
            crossed |= pattern != base_pattern;
            value
        }
        Err(_) => f64::NAN,
    };
    let numeric = finite_diff_partial(&mut f, flat, c, FD_STEP)?;
    if crossed {
        report.coords_skipped += 1;
        return Ok(());
    }
    let plain = relative_error(analytic, numeric);
    report.max_rel_err_f64 = report.max_rel_err_f64.max(plain);
    match refine {
        Some(refine) if plain > REFINE_ABOVE => {
            report.coords_refined += 1;
            let refined = refine(c)?;
            report.record_refined(analytic, refined);
        }
        _ => report.record_refined(analytic, numeric),
    }
    Ok(())
}

/// Gradient of the full N-pair loss with respect to every parameter, checked
/// on `configurations` random (parameters, batch) draws of `arch`, with
/// `num_classes` in `2..=max_classes`.
pub fn check_loss_gradients(
    arch: &ModelConfig,
    rng: &mut Rng,
    configurations: usize,
    coords_per_tensor: usize,
    max_classes: usize,
) -> Result<GradCheckReport> {
    loss_check(arch, rng, configurations, coords_per_tensor, max_classes, None)
}

/// [`check_loss_gradients`] on the same draws, with probes whose `f64`
/// estimate misses by more than [`REFINE_ABOVE`] re-evaluated by `refine`.
pub fn check_loss_gradients_refined(
    arch: &ModelConfig,
    rng: &mut Rng,
    configurations: usize,
    coords_per_tensor: usize,
    max_classes: usize,
    refine: Refiner,
) -> Result<GradCheckReport> {
    loss_check(arch, rng, configurations, coords_per_tensor, max_classes, Some(refine))
}

fn loss_check(
    arch: &ModelConfig,
    rng: &mut Rng,
    configurations: usize,
    coords_per_tensor: usize,
    max_classes: usize,
    refine: Option<Refiner>,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport::default();
    for _ in 0..configurations {
        let params = random_params(arch, rng)?;
        let nc = 2 + rng.below(max_classes.max(2) as u64 - 1) as usize;
        let anchors: Vec<Vec<f64>> = (0..nc).map(|_| random_input(arch.input, rng)).collect();
        let positives: Vec<Vec<f64>> = (0..nc).map(|_| random_input(arch.input, rng)).collect();
        let (_, grads) = batch_loss_and_grads(&params, &anchors, &positives)?;
        let analytic: Vec<f64> = grads.iter().flat_map(|g| g.as_slice().iter().copied()).collect();
        let (_, base_pattern) = loss_and_pattern(&params, &anchors, &positives)?;
        let flat = params.flatten();

        let mut local = GradCheckReport { configurations: 1, ..Default::default() };
        let mut objective = |p: &Parameters| loss_and_pattern(p, &anchors, &positives);
        let (p, a, b) = (&params, &anchors, &positives);
        let mut refine_at = refine.map(|r| move |c: usize| r(p, a, b, c, FD_STEP));
        for c in pick_coords(&params, coords_per_tensor, rng) {
            let hook = refine_at.as_mut().map(|f| f as &mut dyn FnMut(usize) -> Result<f64>);
            probe_coordinate(&params, &flat, c, &base_pattern, analytic[c], &mut objective, hook, &mut local)?;
        }
        report.merge(local);
    }
    Ok(report)
}

/// Backward of the network alone: the gradient of `<g, logits(params, input)>`
/// for random `(params, input, g)` triples.
pub fn check_model_gradients(
    arch: &ModelConfig,
    rng: &mut Rng,
    triples: usize,
    coords_per_tensor: usize,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport::default();
    for _ in 0..triples {
        let params = random_params(arch, rng)?;
        let input = random_input(arch.input, rng);
        let upstream: Vec<f64> = (0..arch.code_bits).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (_, trace) = forward(&params, &input)?;
        let base_pattern = trace.activation_pattern();
        let analytic: Vec<f64> = backward(&params, &trace, &upstream)?
            .iter()
            .flat_map(|g| g.as_slice().iter().copied())
            .collect();
        let flat = params.flatten();
        let mut objective = |p: &Parameters| -> Result<(f64, Vec<usize>)> {
            let (x, trace) = forward(p, &input)?;
            Ok((x.0.iter().zip(&upstream).map(|(a, b)| a * b).sum(), trace.activation_pattern()))
        };

        let mut local = GradCheckReport { configurations: 1, ..Default::default() };
        for c in pick_coords(&params, coords_per_tensor, rng) {
            probe_coordinate(&params, &flat, c, &base_pattern, analytic[c], &mut objective, None, &mut local)?;
        }
        report.merge(local);
    }
    Ok(report)
}
