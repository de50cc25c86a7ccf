use crate::error::{PdhError, Result};

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h` for one coordinate.
pub fn finite_diff_partial<F>(f: &mut F, x: &[f64], i: usize, h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(PdhError::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    let mut probe = x.to_vec();
    probe[i] = x[i] + h;
    let up = f(&probe);
    probe[i] = x[i] - h;
    let down = f(&probe);
    if !up.is_finite() || !down.is_finite() {
        return Err(PdhError::NonFinite(format!(
            "f evaluated to {up} / {down} around coordinate {i}"
        )));
    }
    Ok((up - down) / (2.0 * h))
}

/// Full central-difference gradient of `f` at `x`.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    (0..x.len()).map(|i| finite_diff_partial(&mut f, x, i, h)).collect()
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_and_sum() {
        let g = finite_diff_gradient(|_| 4.2, &[1.0, -2.0, 3.0], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = finite_diff_gradient(|x| x.iter().sum(), &[1.0, -2.0, 3.0, 0.5], 1e-5).unwrap();
        assert!(g.iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn non_finite_is_reported() {
        let err = finite_diff_gradient(|x| 1.0 / (x[0] - 1e-6), &[0.0], 1e-6);
        assert!(matches!(err, Err(PdhError::NonFinite(_))));
        assert!(finite_diff_gradient(|x| x[0], &[0.0], 0.0).is_err());
    }
}
