//! Exact reference computations for the probabilistic model behind the hash.
//!
//! * Ideal hash families: each bit `j` splits the class set into
//!   `(S_j^0, S_j^1)` by independent fair coins; the ideal code of class `i`
//!   has bit `j = t_ij`.
//! * Discrete worlds: finite point sets with class-conditional probability
//!   tables, on which bit posteriors can be computed exactly.
//! * The MAP-equivalence scan, comparing the per-bit MAP decision on the
//!   disagreement probability against thresholding each posterior at 0.5.
//!
//! Classes and bits are 0-based here.

use crate::codec::HashCode;
use crate::error::{PdhError, Result};
use crate::numerics::{stable_sigmoid, Rng};

/// Class-to-side assignment flags `t_ij` (`true` means class `i` is in `S_j^1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealFamily {
    num_classes: usize,
    bits: usize,
    flags: Vec<bool>,
}

impl IdealFamily {
    /// `flags` is row-major `num_classes x bits`.
    pub fn new(num_classes: usize, bits: usize, flags: Vec<bool>) -> Result<Self> {
        if num_classes == 0 || bits == 0 {
            return Err(PdhError::InvalidArgument("family needs >= 1 class and >= 1 bit".into()));
        }
        if flags.len() != num_classes * bits {
            return Err(PdhError::LengthMismatch { left: flags.len(), right: num_classes * bits });
        }
        Ok(Self { num_classes, bits, flags })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn flag(&self, class: usize, bit: usize) -> bool {
        self.flags[class * self.bits + bit]
    }

    /// `|S_j^1|`.
    pub fn alpha1(&self, bit: usize) -> usize {
        (0..self.num_classes).filter(|&i| self.flag(i, bit)).count()
    }

    /// `|S_j^0|`.
    pub fn alpha0(&self, bit: usize) -> usize {
        self.num_classes - self.alpha1(bit)
    }

    /// Errors when either side of bit `j` is empty.
    pub fn check_sides(&self, bit: usize) -> Result<()> {
        if self.alpha0(bit) == 0 {
            return Err(PdhError::EmptySide { bit, side: 0 });
        }
        if self.alpha1(bit) == 0 {
            return Err(PdhError::EmptySide { bit, side: 1 });
        }
        Ok(())
    }
}

/// Every `t_ij` an independent fair coin. Families with an empty side are
/// legal here; posterior computations reject them.
pub fn sample_family(rng: &mut Rng, num_classes: usize, bits: usize) -> Result<IdealFamily> {
    let flags = (0..num_classes * bits).map(|_| rng.coin()).collect();
    IdealFamily::new(num_classes, bits, flags)
}

pub fn ideal_code(fam: &IdealFamily, class: usize) -> Result<HashCode> {
    if class >= fam.num_classes {
        return Err(PdhError::ClassOutOfRange { class, num_classes: fam.num_classes });
    }
    Ok(HashCode::from_bits(&fam.flags[class * fam.bits..(class + 1) * fam.bits]))
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Mean ideal-code distance between classes `a` and `b` over `trials`
/// independently drawn families. Exactly 0 when `a == b`.
pub fn expected_cross_distance_mc(
    rng: &mut Rng,
    num_classes: usize,
    bits: usize,
    (a, b): (usize, usize),
    trials: usize,
) -> Result<McEstimate> {
    if num_classes < 2 {
        return Err(PdhError::InvalidArgument("need at least 2 classes".into()));
    }
    if trials == 0 {
        return Err(PdhError::InvalidArgument("need at least 1 trial".into()));
    }
    for c in [a, b] {
        if c >= num_classes {
            return Err(PdhError::ClassOutOfRange { class: c, num_classes });
        }
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let fam = sample_family(rng, num_classes, bits)?;
        let d = crate::codec::hamming(&ideal_code(&fam, a)?, &ideal_code(&fam, b)?)? as f64;
        sum += d;
        sum_sq += d * d;
    }
    let t = trials as f64;
    let mean = sum / t;
    let var = if trials > 1 { (sum_sq - t * mean * mean).max(0.0) / (t - 1.0) } else { 0.0 };
    Ok(McEstimate { mean, std_err: (var / t).sqrt(), trials })
}

/// Finite point set with class-conditional probability tables `D_i(p)` and a
/// uniform class prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWorld {
    num_points: usize,
    // row-major num_classes x num_points
    tables: Vec<Vec<f64>>,
}

impl DiscreteWorld {
    /// Each table must be non-negative and sum to 1 within 1e-12.
    pub fn new(tables: Vec<Vec<f64>>) -> Result<Self> {
        let num_points = tables.first().map_or(0, Vec::len);
        if tables.is_empty() || num_points == 0 {
            return Err(PdhError::InvalidArgument("world needs >= 1 class and >= 1 point".into()));
        }
        for (i, t) in tables.iter().enumerate() {
            if t.len() != num_points {
                return Err(PdhError::LengthMismatch { left: t.len(), right: num_points });
            }
            if t.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(PdhError::InvalidArgument(format!("class {i}: negative or non-finite probability")));
            }
            let total: f64 = t.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(PdhError::InvalidArgument(format!("class {i}: probabilities sum to {total}")));
            }
        }
        Ok(Self { num_points, tables })
    }

    /// Random world; each table gets a few exact zeros so that one-sided
    /// points occur.
    pub fn random(rng: &mut Rng, num_classes: usize, num_points: usize) -> Result<Self> {
        let tables = (0..num_classes)
            .map(|_| {
                let raw: Vec<f64> = (0..num_points)
                    .map(|_| if rng.bernoulli(0.15) { 0.0 } else { rng.next_f64() + 1e-3 })
                    .collect();
                let total: f64 = raw.iter().sum();
                if total == 0.0 {
                    let mut t = vec![0.0; num_points];
                    t[0] = 1.0;
                    t
                } else {
                    raw.iter().map(|v| v / total).collect()
                }
            })
            .collect();
        Self::new(tables)
    }

    pub fn num_classes(&self) -> usize {
        self.tables.len()
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    /// `D_i(p)`.
    pub fn density(&self, class: usize, point: usize) -> f64 {
        self.tables[class][point]
    }
}

/// Log-likelihood ratio and posterior of one bit at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitPosterior {
    pub x: f64,
    pub q: f64,
}

fn check_pair(world: &DiscreteWorld, fam: &IdealFamily, point: usize, bit: usize) -> Result<()> {
    if world.num_classes() != fam.num_classes {
        return Err(PdhError::LengthMismatch { left: world.num_classes(), right: fam.num_classes });
    }
    if point >= world.num_points {
        return Err(PdhError::InvalidArgument(format!("point {point} out of range")));
    }
    if bit >= fam.bits {
        return Err(PdhError::InvalidArgument(format!("bit {bit} out of range")));
    }
    fam.check_sides(bit)
}

/// Closed form:
///
/// ```text
/// x_j = log( alpha_j^1 * sum_{v in S_j^0} D_v(p) / (alpha_j^0 * sum_{w in S_j^1} D_w(p)) )
/// q_j = 1 / (1 + e^{x_j})
/// ```
///
/// A side with zero mass is handled as the limit: all mass on `S^1` gives
/// `x = -inf, q = 1`; all mass on `S^0` gives `x = +inf, q = 0`.
pub fn analytic_posterior(world: &DiscreteWorld, fam: &IdealFamily, point: usize, bit: usize) -> Result<BitPosterior> {
    check_pair(world, fam, point, bit)?;
    let (mut mass0, mut mass1) = (0.0, 0.0);
    for class in 0..fam.num_classes {
        let d = world.density(class, point);
        if fam.flag(class, bit) {
            mass1 += d;
        } else {
            mass0 += d;
        }
    }
    let numerator = fam.alpha1(bit) as f64 * mass0;
    let denominator = fam.alpha0(bit) as f64 * mass1;
    match (numerator > 0.0, denominator > 0.0) {
        (false, false) => Err(PdhError::ZeroProbability { point }),
        (true, false) => Ok(BitPosterior { x: f64::INFINITY, q: 0.0 }),
        (false, true) => Ok(BitPosterior { x: f64::NEG_INFINITY, q: 1.0 }),
        (true, true) => {
            let x = numerator.ln() - denominator.ln();
            Ok(BitPosterior { x, q: stable_sigmoid(x) })
        }
    }
}

/// `Pr(h_j = 1 | p)` by direct enumeration of the generative model:
/// a bit value `u` with prior 1/2, a class drawn uniformly from `S_j^u`, then
/// `p ~ D_class`. Sums the joint `Pr(u, class, p)` over classes for each `u`
/// and normalises.
pub fn bayes_posterior_bruteforce(world: &DiscreteWorld, fam: &IdealFamily, point: usize, bit: usize) -> Result<f64> {
    check_pair(world, fam, point, bit)?;
    let mut joint = [0.0f64; 2];
    for (u, slot) in joint.iter_mut().enumerate() {
        let side = if u == 1 { fam.alpha1(bit) } else { fam.alpha0(bit) } as f64;
        for class in 0..fam.num_classes {
            let class_given_bit = if usize::from(fam.flag(class, bit)) == u { 1.0 / side } else { 0.0 };
            *slot += 0.5 * class_given_bit * world.density(class, point);
        }
    }
    let total = joint[0] + joint[1];
    if total == 0.0 {
        return Err(PdhError::ZeroProbability { point });
    }
    Ok(joint[1] / total)
}

/// `Pr(h_j = 1 | p)` when the class (not the bit) carries the uniform prior:
/// `sum_{i in S_j^1} D_i(p) / sum_i D_i(p)`. Under this prior the bit prior
/// is `alpha_j^1 / N_c`, so it agrees with [`analytic_posterior`] only for
/// balanced bits (`alpha_j^0 == alpha_j^1`).
pub fn class_prior_posterior(world: &DiscreteWorld, fam: &IdealFamily, point: usize, bit: usize) -> Result<f64> {
    check_pair(world, fam, point, bit)?;
    let total: f64 = (0..fam.num_classes).map(|c| world.density(c, point)).sum();
    if total == 0.0 {
        return Err(PdhError::ZeroProbability { point });
    }
    let ones: f64 = (0..fam.num_classes).filter(|&c| fam.flag(c, bit)).map(|c| world.density(c, point)).sum();
    Ok(ones / total)
}

/// `sigma = [q (1 - q') + (1 - q) q' >= 0.5]`: the MAP value of one bit's
/// disagreement indicator.
pub fn map_sigma(q: f64, q2: f64) -> u8 {
    u8::from(q * (1.0 - q2) + (1.0 - q) * q2 >= 0.5)
}

/// `|h(q) - h(q')|` with `h(v) = [v >= 0.5]`.
pub fn threshold_diff(q: f64, q2: f64) -> u8 {
    u8::from((q >= 0.5) != (q2 >= 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disagreement {
    pub q: f64,
    pub q2: f64,
    pub sigma: u8,
    pub threshold_diff: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapScanReport {
    pub points_checked: usize,
    /// Grid points (0.5 excluded) where the two rules differ.
    pub disagreements: Vec<Disagreement>,
    /// The probe at `(0.5, 0.5)`, where the disagreement probability is
    /// exactly 0.5 so `sigma = 1` while both bits threshold to 1.
    pub boundary: Vec<Disagreement>,
}

/// Compares `sigma` against the thresholded difference on the grid
/// `{k * step} x {k * step}` inside (0, 1), skipping the value 0.5, then
/// probes `(0.5, 0.5)` separately.
///
/// Off 0.5 the rules agree because
/// `q + q' - 2 q q' = (1 - (2q - 1)(2q' - 1)) / 2`.
/// On the line `q = 0.5` the disagreement probability is 0.5 for every
/// `q'`, so `sigma = 1` while the thresholded difference is 0 whenever
/// `q' >= 0.5`; the probe reports one representative of that set.
pub fn map_equivalence_scan(grid_step: f64) -> Result<MapScanReport> {
    if !(grid_step > 0.0 && grid_step < 0.5) {
        return Err(PdhError::InvalidArgument(format!("grid step must lie in (0, 0.5), got {grid_step}")));
    }
    let grid: Vec<f64> = (1..)
        .map(|k| k as f64 * grid_step)
        .take_while(|&v| v < 1.0 - 1e-12)
        .filter(|&v| (v - 0.5).abs() > 1e-12)
        .collect();
    let mut disagreements = Vec::new();
    for &q in &grid {
        for &q2 in &grid {
            let (sigma, diff) = (map_sigma(q, q2), threshold_diff(q, q2));
            if sigma != diff {
                disagreements.push(Disagreement { q, q2, sigma, threshold_diff: diff });
            }
        }
    }
    let boundary = Disagreement { q: 0.5, q2: 0.5, sigma: map_sigma(0.5, 0.5), threshold_diff: threshold_diff(0.5, 0.5) };
    Ok(MapScanReport {
        points_checked: grid.len() * grid.len(),
        disagreements,
        boundary: if boundary.sigma != boundary.threshold_diff { vec![boundary] } else { vec![] },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_world(d1: f64, d2: f64) -> DiscreteWorld {
        DiscreteWorld::new(vec![vec![d1, 1.0 - d1], vec![d2, 1.0 - d2]]).unwrap()
    }

    #[test]
    fn family_basics() {
        let a = sample_family(&mut Rng::new(1), 5, 16).unwrap();
        let b = sample_family(&mut Rng::new(1), 5, 16).unwrap();
        assert_eq!(a, b);
        let fam = IdealFamily::new(2, 3, vec![true, false, true, false, true, false]).unwrap();
        assert_eq!(ideal_code(&fam, 0).unwrap().words(), &[0b101]);
        assert_eq!(ideal_code(&fam, 0).unwrap(), ideal_code(&fam, 0).unwrap());
        assert_eq!(crate::codec::hamming(&ideal_code(&fam, 0).unwrap(), &ideal_code(&fam, 1).unwrap()).unwrap(), 3);
        assert!(matches!(ideal_code(&fam, 2), Err(PdhError::ClassOutOfRange { .. })));
    }

    #[test]
    fn single_class_family_has_empty_sides() {
        let fam = sample_family(&mut Rng::new(2), 1, 8).unwrap();
        for j in 0..8 {
            assert!(matches!(fam.check_sides(j), Err(PdhError::EmptySide { .. })));
        }
    }

    #[test]
    fn coin_flags_are_fair() {
        let mut rng = Rng::new(12);
        let fam = sample_family(&mut rng, 1000, 100).unwrap();
        let ones = fam.flags.iter().filter(|&&f| f).count() as f64;
        let n = fam.flags.len() as f64;
        assert!((ones / n - 0.5).abs() < 4.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn cross_distance_mc() {
        let same = expected_cross_distance_mc(&mut Rng::new(3), 4, 48, (1, 1), 50).unwrap();
        assert_eq!(same.mean, 0.0);
        let one_bit = expected_cross_distance_mc(&mut Rng::new(3), 2, 1, (0, 1), 20_000).unwrap();
        assert!((one_bit.mean - 0.5).abs() < 4.0 * 0.5 / (20_000f64).sqrt());
        assert!(expected_cross_distance_mc(&mut Rng::new(3), 1, 4, (0, 0), 5).is_err());
    }

    #[test]
    fn analytic_posterior_examples() {
        // C1 in S^1, C2 in S^0
        let fam = IdealFamily::new(2, 1, vec![true, false]).unwrap();
        let world = two_class_world(0.2, 0.6);
        let post = analytic_posterior(&world, &fam, 0, 0).unwrap();
        assert!((post.x - 3f64.ln()).abs() < 1e-15);
        assert!((post.q - 0.25).abs() < 1e-15);
        let direct = 0.2 * 0.5 / (0.2 * 0.5 + 0.6 * 0.5);
        assert!((bayes_posterior_bruteforce(&world, &fam, 0, 0).unwrap() - direct).abs() < 1e-15);

        let flat = two_class_world(0.3, 0.3);
        assert_eq!(analytic_posterior(&flat, &fam, 0, 0).unwrap().q, 0.5);

        // all mass at point 0 on S^1
        let one_sided = DiscreteWorld::new(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let p = analytic_posterior(&one_sided, &fam, 0, 0).unwrap();
        assert_eq!((p.x, p.q), (f64::NEG_INFINITY, 1.0));
        assert_eq!(bayes_posterior_bruteforce(&one_sided, &fam, 0, 0).unwrap(), 1.0);
        let flipped = IdealFamily::new(2, 1, vec![false, true]).unwrap();
        assert_eq!(analytic_posterior(&one_sided, &flipped, 0, 0).unwrap().q, 0.0);
    }

    #[test]
    fn posterior_errors() {
        let world = DiscreteWorld::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let fam = IdealFamily::new(2, 1, vec![true, false]).unwrap();
        assert!(matches!(analytic_posterior(&world, &fam, 0, 0), Err(PdhError::ZeroProbability { .. })));
        assert!(bayes_posterior_bruteforce(&world, &fam, 0, 0).is_err());
        let lopsided = IdealFamily::new(2, 1, vec![true, true]).unwrap();
        assert!(matches!(analytic_posterior(&world, &lopsided, 1, 0), Err(PdhError::EmptySide { side: 0, .. })));
        assert!(DiscreteWorld::new(vec![vec![0.5, 0.6]]).is_err());
    }

    #[test]
    fn analytic_matches_bruteforce_on_random_worlds() {
        let mut rng = Rng::new(99);
        let mut checked = 0;
        while checked < 500 {
            let nc = 2 + rng.below(6) as usize;
            let points = 1 + rng.below(6) as usize;
            let world = DiscreteWorld::random(&mut rng, nc, points).unwrap();
            let fam = sample_family(&mut rng, nc, 4).unwrap();
            let (p, j) = (rng.below(world.num_points() as u64) as usize, rng.below(4) as usize);
            let (Ok(a), Ok(b)) = (analytic_posterior(&world, &fam, p, j), bayes_posterior_bruteforce(&world, &fam, p, j))
            else {
                continue;
            };
            assert!((a.q - b).abs() <= 1e-12, "{} vs {b}", a.q);
            checked += 1;
        }
    }

    #[test]
    fn class_prior_posterior_agrees_only_when_balanced() {
        // C1 in S^1; C2, C3 in S^0; equal densities at point 0
        let world = DiscreteWorld::new(vec![vec![0.5, 0.5]; 3]).unwrap();
        let fam = IdealFamily::new(3, 1, vec![true, false, false]).unwrap();
        assert!((class_prior_posterior(&world, &fam, 0, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(analytic_posterior(&world, &fam, 0, 0).unwrap().q, 0.5);

        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let world = DiscreteWorld::random(&mut rng, 4, 3).unwrap();
            // two classes per side
            let fam = IdealFamily::new(4, 1, vec![true, false, true, false]).unwrap();
            let p = rng.below(3) as usize;
            if let (Ok(a), Ok(c)) = (analytic_posterior(&world, &fam, p, 0), class_prior_posterior(&world, &fam, p, 0)) {
                assert!((a.q - c).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn map_scan() {
        let report = map_equivalence_scan(0.01).unwrap();
        assert_eq!(report.points_checked, 98 * 98);
        assert!(report.disagreements.is_empty());
        assert_eq!(report.boundary.len(), 1);
        assert_eq!((report.boundary[0].sigma, report.boundary[0].threshold_diff), (1, 0));
        assert_eq!((map_sigma(0.9, 0.1), threshold_diff(0.9, 0.1)), (1, 1));
        assert!(map_equivalence_scan(0.0).is_err());
        assert!(map_equivalence_scan(0.5).is_err());
    }

    #[test]
    fn half_line_anomaly() {
        // sigma is 1 along q = 0.5, thresholding disagrees whenever q' >= 0.5
        for q2 in [0.5, 0.6, 0.99] {
            assert_eq!((map_sigma(0.5, q2), threshold_diff(0.5, q2)), (1, 0));
        }
        assert_eq!((map_sigma(0.5, 0.3), threshold_diff(0.5, 0.3)), (1, 1));
    }
}
