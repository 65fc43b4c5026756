//! Random linear Gaussian instances for tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::pathway::LinearReward;
use crate::error::Result;
use crate::model::{LinearGaussianModel, LinearGaussianSpec, LinearPolicy, ResidualSpec};
use crate::rng;

/// Model, policy centred on the model means, and linear reward.
#[derive(Debug, Clone)]
pub struct LinearInstance {
    pub model: LinearGaussianModel,
    pub policy: LinearPolicy,
    pub reward: LinearReward,
}

/// Residual structure of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Diagonal,
    /// Dense `Hn x Hn` covariance with cross-period correlation.
    Full,
}

fn uniform_rows(r: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| scale * r.random_range(-1.0..1.0)).collect()).collect()
}

/// A stable random instance: coefficients are scaled so pathway products stay bounded.
pub fn random_instance(h: usize, n: usize, m: usize, kind: CovarianceKind, seed: u64) -> Result<LinearInstance> {
    let mut r = rng::stream(seed, &[0x1257]);
    let scale = 0.6 / (n as f64).sqrt();
    let hn = h * n;
    let residual = match kind {
        CovarianceKind::Diagonal => {
            ResidualSpec::Diagonal { sd: (0..h).map(|_| (0..n).map(|_| r.random_range(0.2..1.0)).collect()).collect() }
        }
        CovarianceKind::Full => {
            let a = DMatrix::from_fn(hn, hn, |_, _| r.sample::<f64, _>(StandardNormal));
            let cov = (&a * a.transpose()) / hn as f64 + DMatrix::identity(hn, hn) * 0.05;
            ResidualSpec::Full { cov: (0..hn).map(|i| cov.row(i).iter().copied().collect()).collect() }
        }
    };
    let spec = LinearGaussianSpec {
        n,
        m,
        horizon: h,
        state_labels: None,
        action_labels: None,
        s0: (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
        mu_s: uniform_rows(&mut r, h, n, 1.0),
        mu_a: uniform_rows(&mut r, h, m, 1.0),
        beta_s: (1..h).map(|_| uniform_rows(&mut r, n, n, scale)).collect(),
        beta_a: (1..h).map(|_| uniform_rows(&mut r, m, n, scale)).collect(),
        residual,
    };
    let model = LinearGaussianModel::from_spec(spec)?;
    let theta = (1..h).map(|_| DMatrix::from_fn(n, m, |_, _| scale * r.random_range(-1.0..1.0))).collect();
    let policy = LinearPolicy::for_linear_model(&model, theta)?;
    let reward = LinearReward {
        m: (0..h).map(|_| r.random_range(-1.0..1.0)).collect(),
        b: (0..h).map(|_| DVector::from_fn(m, |_, _| r.random_range(-1.0..1.0))).collect(),
        c: (0..h).map(|_| DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0))).collect(),
    };
    Ok(LinearInstance { model, policy, reward })
}
