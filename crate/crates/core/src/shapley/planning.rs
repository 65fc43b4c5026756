//! Sample sizes for a target accuracy.
//!
//! With per-walk contribution variance `sigma^2`, Chebyshev's inequality gives
//! `P(|Sh_hat - Sh| >= eps) <= delta` once `N >= sigma^2 / (delta eps^2)`. For
//! contributions confined to a range `r`, Hoeffding's inequality gives
//! `N >= ln(2/delta) r^2 / (2 eps^2)`.

use crate::error::{Error, Result};

fn check(delta: f64, epsilon: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Ceiling that ignores floating-point fuzz just above an integer.
fn ceil_count(x: f64) -> usize {
    let r = x.round();
    let c = if (x - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { x.ceil() };
    (c as usize).max(1)
}

pub fn required_sample_size_variance(variance: f64, delta: f64, epsilon: f64) -> Result<usize> {
    check(delta, epsilon)?;
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance must be finite and non-negative, got {variance}")));
    }
    Ok(ceil_count(variance / (delta * epsilon * epsilon)))
}

pub fn required_sample_size_range(range: f64, delta: f64, epsilon: f64) -> Result<usize> {
    check(delta, epsilon)?;
    if !(range >= 0.0 && range.is_finite()) {
        return Err(Error::invalid(format!("range must be finite and non-negative, got {range}")));
    }
    Ok(ceil_count((2.0 / delta).ln() * range * range / (2.0 * epsilon * epsilon)))
}

/// Plan from pilot contribution variances `variances[input][output]`.
///
/// For each output the per-input sizes are averaged with weights equal to the
/// input variances; the largest output requirement is returned.
pub fn plan_sample_size(variances: &[Vec<f64>], delta: f64, epsilon: f64) -> Result<usize> {
    check(delta, epsilon)?;
    let outputs = variances.first().map_or(0, Vec::len);
    if variances.iter().any(|row| row.len() != outputs) {
        return Err(Error::dims("pilot variance rows have different lengths"));
    }
    let mut best = 1usize;
    for j in 0..outputs {
        let mut weight = 0.0;
        let mut acc = 0.0;
        for row in variances {
            let v = row[j];
            let size = required_sample_size_variance(v, delta, epsilon)?;
            weight += v;
            acc += v * size as f64;
        }
        if weight > 0.0 {
            best = best.max(ceil_count(acc / weight));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sizes() {
        assert_eq!(required_sample_size_variance(1.0, 0.05, 0.1).unwrap(), 2000);
        assert_eq!(required_sample_size_range(1.0, 0.05, 0.1).unwrap(), 185);
        assert_eq!(required_sample_size_variance(0.0, 0.05, 0.1).unwrap(), 1);
    }

    #[test]
    fn invalid_arguments() {
        assert!(required_sample_size_variance(1.0, 0.0, 0.1).is_err());
        assert!(required_sample_size_variance(1.0, 1.0, 0.1).is_err());
        assert!(required_sample_size_range(1.0, 0.5, 0.0).is_err());
        assert!(required_sample_size_variance(-1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn weighted_plan() {
        let pilot = vec![vec![1.0], vec![1.0], vec![4.0]];
        // Sizes 2000, 2000, 8000 weighted 1:1:4.
        assert_eq!(plan_sample_size(&pilot, 0.05, 0.1).unwrap(), 6000);
        assert_eq!(plan_sample_size(&[vec![0.0, 0.0]], 0.05, 0.1).unwrap(), 1);
    }
}
