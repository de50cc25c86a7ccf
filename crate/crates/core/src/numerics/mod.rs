//! Dense linear algebra, a seedable PRNG, SGD with momentum and a central
//! finite-difference gradient checker.
//!
//! Everything here is `f64` and single-threaded with fixed summation order,
//! so results are bit-reproducible for a given seed.

mod diff;
mod matrix;
mod rng;
mod sgd;

pub use diff::{finite_diff_gradient, finite_diff_partial, relative_error};
pub use matrix::{matmul, Matrix};
pub use rng::{splitmix64, Rng};
pub use sgd::{sgd_step, SgdConfig};

/// Largest `f64` strictly below 0.5.
const BELOW_HALF: f64 = 0.5 - f64::EPSILON / 4.0;
/// Largest `f64` strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Bit posterior from a log-likelihood ratio: `1 / (1 + e^x)`.
///
/// Note the sign: the result is *decreasing* in `x`, so `x <= 0` maps to a
/// posterior `>= 0.5`. The output is kept strictly inside `(0, 1)` and
/// strictly below 0.5 for every `x > 0`, even where the exact value is not
/// representable (`|x|` large, or `x` positive but tiny).
pub fn stable_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        (e / (1.0 + e)).clamp(f64::MIN_POSITIVE, BELOW_HALF)
    } else {
        (1.0 / (1.0 + x.exp())).min(BELOW_ONE)
    }
}
