//! Residual noise models.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Residual sd `sigma_k sqrt(dt)`.
    Additive,
    /// Residual sd `sigma_k max(s_k, 0) sqrt(dt)`, evaluated at the previous state.
    Multiplicative,
}

/// How standard-normal draws become residuals `e_t`.
#[derive(Debug, Clone)]
pub enum NoiseSpec {
    /// Independent components, scaled per component and possibly by the state.
    Independent { kind: NoiseKind, scale: Vec<f64>, dt: f64 },
    /// Jointly Gaussian residuals over the whole horizon.
    Correlated(Arc<CorrelatedNoise>),
}

impl NoiseSpec {
    /// Standard deviation of residual component `k` given the previous state.
    pub fn independent_sd(kind: NoiseKind, scale: &[f64], dt: f64, k: usize, prev: f64) -> f64 {
        match kind {
            NoiseKind::Additive => scale[k] * dt.sqrt(),
            NoiseKind::Multiplicative => scale[k] * prev.max(0.0) * dt.sqrt(),
        }
    }
}

/// Zero-mean Gaussian residual vector `(e_1, .., e_H)` with full covariance.
#[derive(Debug, Clone)]
pub struct CorrelatedNoise {
    n: usize,
    horizon: usize,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
    sd: Vec<f64>,
}

impl CorrelatedNoise {
    pub fn new(n: usize, horizon: usize, cov: DMatrix<f64>) -> Result<Self> {
        let dim = n * horizon;
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::dims(format!(
                "residual covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let factor = psd_factor(&cov)?;
        let sd = (0..dim).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        Ok(Self { n, horizon, cov, factor, sd })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Block `Cov(e_i, e_j)` for 1-based periods.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.cov.view(((i - 1) * self.n, (j - 1) * self.n), (self.n, self.n)).into_owned()
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    /// Residuals `L z` for a standard-normal vector `z`.
    pub fn residuals(&self, z: &[f64]) -> Vec<f64> {
        let dim = self.sd.len();
        let mut out = vec![0.0; dim];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(dim) {
                acc += self.factor[(i, j)] * zj;
            }
            *o = acc;
        }
        out
    }
}

/// A matrix `L` with `L L^T = cov` for a symmetric positive semi-definite `cov`.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = cov.nrows();
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..dim {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotPositiveSemiDefinite);
            }
        }
    }
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::NotPositiveSemiDefinite);
    }
    let mut v = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let r = l.max(0.0).sqrt();
        v.column_mut(j).scale_mut(r);
    }
    Ok(v)
}
