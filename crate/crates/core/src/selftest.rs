//! Property checks behind `pdh selftest`.
//!
//! Each property runs against an independent reference (brute-force Bayes,
//! Monte Carlo, finite differences, exhaustive sort) and reports the
//! statistic it observed. `Fast` keeps the whole run well under 30 s; `Full`
//! uses 1e5-trial Monte Carlo suites and 100 gradient configurations per
//! architecture.

use std::fmt::Write as _;
use std::time::Instant;

use crate::codec::{hamming, search_topk, CodeBook, CodeEntry, HashCode};
use crate::error::Result;
use crate::gradcheck::{check_loss_gradients, check_model_gradients, GradCheckReport};
use crate::loss::expected_hamming;
use crate::model::{InputShape, ModelConfig, PosteriorVector};
use crate::numerics::{stable_sigmoid, Rng};
use crate::oracle::{
    analytic_posterior, bayes_posterior_bruteforce, expected_cross_distance_mc, ideal_code, map_equivalence_scan,
    sample_family, DiscreteWorld,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level {other:?} (expected fast or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelftestOptions {
    pub level: Level,
    pub seed: u64,
    /// Maps a log-likelihood ratio to a bit posterior. Replaceable so that a
    /// broken implementation can be injected and shown to be caught.
    pub sigmoid: fn(f64) -> f64,
}

impl SelftestOptions {
    pub fn new(level: Level) -> Self {
        Self { level, seed: 0x5eed, sigmoid: stable_sigmoid }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelftestReport {
    pub results: Vec<PropertyResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.name == name)
    }

    /// One `PASS`/`FAIL` line per property.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let tag = if r.passed { "PASS" } else { "FAIL" };
            writeln!(s, "{tag} {:<22} {:>7.2}s  {}", r.name, r.seconds, r.detail).unwrap();
        }
        let failed = self.results.iter().filter(|r| !r.passed).count();
        writeln!(s, "{} properties, {failed} failed", self.results.len()).unwrap();
        s
    }
}

struct Budget {
    coin_draws: usize,
    family_trials: usize,
    hamming_draws: usize,
    grad_configs: usize,
    retrieval_queries: usize,
}

impl Budget {
    fn for_level(level: Level) -> Self {
        match level {
            Level::Fast => Budget {
                coin_draws: 100_000,
                family_trials: 10_000,
                hamming_draws: 10_000,
                grad_configs: 4,
                retrieval_queries: 20,
            },
            Level::Full => Budget {
                coin_draws: 100_000,
                family_trials: 100_000,
                hamming_draws: 100_000,
                grad_configs: 100,
                retrieval_queries: 100,
            },
        }
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> Result<SelftestReport> {
    run_selftest_with_progress(opts, |_| {})
}

/// Like [`run_selftest`], calling `progress` after each property.
pub fn run_selftest_with_progress(
    opts: &SelftestOptions,
    mut progress: impl FnMut(&PropertyResult),
) -> Result<SelftestReport> {
    let budget = Budget::for_level(opts.level);
    let mut root = Rng::new(opts.seed);
    let mut report = SelftestReport::default();
    type Check<'a> = Box<dyn FnOnce(&mut Rng) -> Result<(bool, String)> + 'a>;
    let checks: Vec<(&'static str, Check)> = vec![
        ("posterior_sigmoid", Box::new(|rng| sigmoid_property(opts.sigmoid, rng))),
        ("bayes_chain", Box::new(bayes_chain)),
        ("map_equivalence", Box::new(|_| map_equivalence())),
        ("coin_fairness", Box::new(|rng| coin_fairness(rng, budget.coin_draws))),
        ("ideal_distance", Box::new(|rng| ideal_distance(rng, budget.family_trials))),
        ("expected_hamming_mc", Box::new(|rng| expected_hamming_mc(rng, budget.hamming_draws))),
        ("grad_mlp_small", Box::new(|rng| gradients(&ModelConfig::mlp_small(2, 12), rng, budget.grad_configs))),
        (
            "grad_conv_small",
            Box::new(|rng| {
                let input = InputShape::Image { height: 28, width: 28, channels: 1 };
                gradients(&ModelConfig::conv_small(input, 12), rng, budget.grad_configs)
            }),
        ),
        ("packed_hamming", Box::new(packed_hamming)),
        ("topk_exhaustive", Box::new(|rng| topk_exhaustive(rng, budget.retrieval_queries))),
    ];
    for (name, check) in checks {
        let mut rng = root.split();
        let start = Instant::now();
        let (passed, detail) = check(&mut rng)?;
        let result = PropertyResult { name, passed, detail, seconds: start.elapsed().as_secs_f64() };
        progress(&result);
        report.results.push(result);
    }
    Ok(report)
}

/// The posterior is the logistic function of the log-likelihood ratio with
/// the decreasing sign convention: checked on fixed anchors and against the
/// brute-force Bayes posterior using the closed-form ratio.
fn sigmoid_property(sigmoid: fn(f64) -> f64, rng: &mut Rng) -> Result<(bool, String)> {
    let anchors = [(0.0, 0.5), (3f64.ln(), 0.25), (-3f64.ln(), 0.75), (-(4f64.ln()), 0.8)];
    let mut worst = anchors.iter().map(|&(x, q)| (sigmoid(x) - q).abs()).fold(0.0, f64::max);
    let mut checked = anchors.len();
    while checked < 1000 {
        let nc = 2 + rng.below(5) as usize;
        let world = DiscreteWorld::random(rng, nc, 4)?;
        let fam = sample_family(rng, nc, 4)?;
        let (p, j) = (rng.below(4) as usize, rng.below(4) as usize);
        if fam.check_sides(j).is_err() {
            continue;
        }
        let Ok(bp) = analytic_posterior(&world, &fam, p, j) else { continue };
        if !bp.x.is_finite() {
            continue;
        }
        let reference = bayes_posterior_bruteforce(&world, &fam, p, j)?;
        worst = worst.max((sigmoid(bp.x) - reference).abs());
        checked += 1;
    }
    Ok((worst <= 1e-12, format!("max |sigmoid(x) - bayes| = {worst:.3e} over {checked} cases")))
}

/// Closed-form posterior against direct enumeration on 1e3 random tuples.
fn bayes_chain(rng: &mut Rng) -> Result<(bool, String)> {
    let (mut tuples, mut worst, mut infinite) = (0usize, 0.0f64, 0usize);
    while tuples < 1000 {
        let nc = 2 + rng.below(7) as usize;
        let points = 1 + rng.below(6) as usize;
        let bits = 1 + rng.below(8) as usize;
        let world = DiscreteWorld::random(rng, nc, points)?;
        let fam = sample_family(rng, nc, bits)?;
        let (p, j) = (rng.below(points as u64) as usize, rng.below(bits as u64) as usize);
        if fam.check_sides(j).is_err() {
            continue;
        }
        let (Ok(analytic), Ok(brute)) =
            (analytic_posterior(&world, &fam, p, j), bayes_posterior_bruteforce(&world, &fam, p, j))
        else {
            continue;
        };
        infinite += usize::from(!analytic.x.is_finite());
        worst = worst.max((analytic.q - brute).abs());
        tuples += 1;
    }
    Ok((
        worst <= 1e-12,
        format!("max abs diff {worst:.3e} over {tuples} tuples ({infinite} one-sided)"),
    ))
}

fn map_equivalence() -> Result<(bool, String)> {
    let scan = map_equivalence_scan(0.01)?;
    let ok = scan.disagreements.is_empty() && scan.boundary.len() == 1;
    Ok((
        ok,
        format!(
            "{} grid points, {} disagreements, {} boundary case(s)",
            scan.points_checked,
            scan.disagreements.len(),
            scan.boundary.len()
        ),
    ))
}

/// Family flags are fair coins: empirical mean within 4 standard errors of 0.5.
fn coin_fairness(rng: &mut Rng, draws: usize) -> Result<(bool, String)> {
    let (nc, bits) = (10usize, 10usize);
    let per = nc * bits;
    let families = draws.div_ceil(per);
    let mut ones = 0usize;
    for _ in 0..families {
        let fam = sample_family(rng, nc, bits)?;
        ones += (0..nc).flat_map(|c| (0..bits).map(move |j| (c, j))).filter(|&(c, j)| fam.flag(c, j)).count();
    }
    let total = (families * per) as f64;
    let mean = ones as f64 / total;
    let z = (mean - 0.5) / (0.25 / total).sqrt();
    Ok((z.abs() <= 4.0, format!("mean {mean:.5} over {total} flags, z = {z:+.2}")))
}

/// Same class at distance exactly 0; distinct classes at n/2 on average.
fn ideal_distance(rng: &mut Rng, trials: usize) -> Result<(bool, String)> {
    let n = 48;
    let mut same_ok = true;
    for _ in 0..100 {
        let fam = sample_family(rng, 10, n)?;
        let c = rng.below(10) as usize;
        same_ok &= hamming(&ideal_code(&fam, c)?, &ideal_code(&fam, c)?)? == 0;
    }
    let same_mc = expected_cross_distance_mc(rng, 10, n, (3, 3), 100)?;
    let cross = expected_cross_distance_mc(rng, 10, n, (0, 1), trials)?;
    let sigma = (n as f64 / 4.0).sqrt() / (trials as f64).sqrt();
    let dev = (cross.mean - n as f64 / 2.0).abs();
    Ok((
        same_ok && same_mc.mean == 0.0 && dev <= 4.0 * sigma,
        format!("cross mean {:.4} (|dev| {dev:.4} <= {:.4}), same-class 0", cross.mean, 4.0 * sigma),
    ))
}

/// Expected Hamming distance against sampled Bernoulli code pairs on 100
/// random posterior pairs.
fn expected_hamming_mc(rng: &mut Rng, draws: usize) -> Result<(bool, String)> {
    let (mut worst_z, mut failures) = (0.0f64, 0usize);
    for _ in 0..100 {
        let n = 1 + rng.below(48) as usize;
        let q: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let q2: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let analytic = expected_hamming(&PosteriorVector(q.clone()), &PosteriorVector(q2.clone()))?;
        let mut sum = 0u64;
        for _ in 0..draws {
            for (a, b) in q.iter().zip(&q2) {
                sum += u64::from(rng.bernoulli(*a) != rng.bernoulli(*b));
            }
        }
        let mean = sum as f64 / draws as f64;
        let var: f64 = q.iter().zip(&q2).map(|(a, b)| {
            let p = a * (1.0 - b) + (1.0 - a) * b;
            p * (1.0 - p)
        }).sum();
        let z = (mean - analytic) / (var / draws as f64).sqrt();
        worst_z = worst_z.max(z.abs());
        failures += usize::from(z.abs() > 4.0);
    }
    Ok((failures == 0, format!("100 pairs x {draws} draws, max |z| = {worst_z:.2}")))
}

fn gradients(arch: &ModelConfig, rng: &mut Rng, configurations: usize) -> Result<(bool, String)> {
    let mut report: GradCheckReport = check_loss_gradients(arch, rng, configurations, 3, 4)?;
    let model = check_model_gradients(arch, rng, configurations, 3)?;
    let ok = report.max_rel_err < 1e-4 && model.max_rel_err < 1e-4 && report.coords_checked > 0;
    report.coords_skipped += model.coords_skipped;
    Ok((
        ok,
        format!(
            "{} configs, loss max rel err {:.2e} ({} coords), network {:.2e} ({} coords), {} kink skips",
            report.configurations,
            report.max_rel_err,
            report.coords_checked,
            model.max_rel_err,
            model.coords_checked,
            report.coords_skipped
        ),
    ))
}

/// Bit-by-bit reference for packed Hamming distance.
fn naive_hamming(a: &[bool], b: &[bool]) -> u32 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

fn random_code(rng: &mut Rng, n: usize) -> (Vec<bool>, HashCode) {
    let bits: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
    let code = HashCode::from_bits(&bits);
    (bits, code)
}

fn packed_hamming(rng: &mut Rng) -> Result<(bool, String)> {
    let lengths = [1usize, 12, 24, 32, 48, 63, 64, 65, 128];
    let mut mismatches = 0usize;
    for &n in &lengths {
        for _ in 0..10_000 {
            let (a_bits, a) = random_code(rng, n);
            let (b_bits, b) = random_code(rng, n);
            mismatches += usize::from(hamming(&a, &b)? != naive_hamming(&a_bits, &b_bits));
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches over {} pairs, n in {lengths:?}", lengths.len() * 10_000)))
}

/// Top-k search against a full stable sort by `(distance, id)`.
fn topk_exhaustive(rng: &mut Rng, queries: usize) -> Result<(bool, String)> {
    let n = 48;
    let mut raw = Vec::with_capacity(10_000);
    let mut entries = Vec::with_capacity(10_000);
    for id in 0..10_000u64 {
        let (bits, code) = random_code(rng, n);
        let label = rng.below(10) as u16;
        raw.push((id, bits));
        entries.push(CodeEntry { id, label, code });
    }
    let book = CodeBook::new(n, entries)?;
    let mut mismatches = 0usize;
    for _ in 0..queries {
        let (q_bits, q) = random_code(rng, n);
        let mut oracle: Vec<(u32, u64)> = raw.iter().map(|(id, b)| (naive_hamming(&q_bits, b), *id)).collect();
        oracle.sort_unstable();
        for k in [1usize, 10, 100] {
            let got: Vec<(u32, u64)> = search_topk(&book, &q, k)?.iter().map(|nb| (nb.distance, nb.id)).collect();
            mismatches += usize::from(got[..] != oracle[..k]);
        }
    }
    Ok((mismatches == 0, format!("{queries} queries x k in {{1,10,100}} on 10000 codes, {mismatches} mismatches")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrong_sign(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn individual_properties_pass() {
        let mut rng = Rng::new(3);
        assert!(sigmoid_property(stable_sigmoid, &mut rng).unwrap().0);
        assert!(bayes_chain(&mut rng).unwrap().0);
        assert!(map_equivalence().unwrap().0);
        assert!(coin_fairness(&mut rng, 20_000).unwrap().0);
        assert!(ideal_distance(&mut rng, 2_000).unwrap().0);
        assert!(packed_hamming(&mut rng).unwrap().0);
        assert!(topk_exhaustive(&mut rng, 3).unwrap().0);
    }

    #[test]
    fn tampered_sigmoid_is_caught() {
        let (ok, detail) = sigmoid_property(wrong_sign, &mut Rng::new(3)).unwrap();
        assert!(!ok, "{detail}");
    }

    #[test]
    fn level_parsing() {
        assert_eq!("fast".parse::<Level>().unwrap(), Level::Fast);
        assert!("medium".parse::<Level>().is_err());
    }
}
