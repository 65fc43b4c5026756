//! Uniformity diagnostics for sphere samplers.

use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value, `sqrt(-ln(alpha/2)/2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
}

impl KsOutcome {
    pub fn passed(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// KS test of the first coordinate of points on `S^{q-1}`.
///
/// For a uniform point, `(x_1 + 1)/2` follows `Beta((q-1)/2, (q-1)/2)`.
pub fn ks_first_coordinate(points: &[Vec<f64>], alpha: f64) -> Result<KsOutcome> {
    let q = points.first().map(Vec::len).ok_or_else(|| Error::invalid("no points"))?;
    if q < 2 {
        return Err(Error::invalid("first-coordinate test needs ambient dimension at least 2"));
    }
    let shape = (q as f64 - 1.0) / 2.0;
    let beta = Beta::new(shape, shape).map_err(|e| Error::invalid(e.to_string()))?;
    let u: Vec<f64> = points.iter().map(|p| (p[0] + 1.0) / 2.0).collect();
    Ok(KsOutcome {
        statistic: ks_statistic(&u, |x| beta.cdf(x.clamp(0.0, 1.0))),
        critical: ks_critical_value(points.len(), alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_value_at_one_percent() {
        assert!((ks_critical_value(1, 0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn perfect_grid_has_small_statistic() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_statistic(&xs, |x| x) - 0.0005).abs() < 1e-12);
    }
}
