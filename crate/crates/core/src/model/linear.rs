//! Linear Gaussian pKG model.
//!
//! With deviations `ds_t = s_t - mu^s_t` and `da_t = a_t - mu^a_t`,
//!
//! ```text
//! s_1     = s_0 + e_1
//! s_{t+1} = mu^s_{t+1} + beta_s,t^T ds_t + beta_a,t^T da_t + e_{t+1},   t = 1..H-1
//! ```
//!
//! where `beta_s,t` is `n x n`, `beta_a,t` is `m x n` and `(e_1, .., e_H)` is
//! zero-mean Gaussian with an arbitrary `Hn x Hn` covariance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::noise::{CorrelatedNoise, NoiseSpec};
use super::{Parameterized, PkgModel};
use crate::error::{Error, Result};

/// Residual covariance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResidualSpec {
    /// Independent residuals with standard deviations `sd[t][k]`.
    Diagonal { sd: Vec<Vec<f64>> },
    /// Independent periods with within-period covariance blocks `cov[t]`.
    Blocks { cov: Vec<Vec<Vec<f64>>> },
    /// Full `Hn x Hn` covariance, row-major.
    Full { cov: Vec<Vec<f64>> },
}

/// Serializable form; every matrix is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianSpec {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    #[serde(default)]
    pub state_labels: Option<Vec<String>>,
    #[serde(default)]
    pub action_labels: Option<Vec<String>>,
    pub s0: Vec<f64>,
    pub mu_s: Vec<Vec<f64>>,
    pub mu_a: Vec<Vec<f64>>,
    pub beta_s: Vec<Vec<Vec<f64>>>,
    pub beta_a: Vec<Vec<Vec<f64>>>,
    pub residual: ResidualSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LinearGaussianSpec", into = "LinearGaussianSpec")]
pub struct LinearGaussianModel {
    n: usize,
    m: usize,
    horizon: usize,
    state_labels: Vec<String>,
    action_labels: Vec<String>,
    s0: Vec<f64>,
    mu_s: Vec<DVector<f64>>,
    mu_a: Vec<DVector<f64>>,
    beta_s: Vec<DMatrix<f64>>,
    beta_a: Vec<DMatrix<f64>>,
    noise: NoiseSpec,
    correlated: Arc<CorrelatedNoise>,
}

fn matrix(rows: &[Vec<f64>], r: usize, c: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::dims(format!("{what} must be {r}x{c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl TryFrom<LinearGaussianSpec> for LinearGaussianModel {
    type Error = Error;

    fn try_from(spec: LinearGaussianSpec) -> Result<Self> {
        let LinearGaussianSpec { n, m, horizon: h, state_labels, action_labels, s0, mu_s, mu_a, beta_s, beta_a, residual } =
            spec;
        if n == 0 || h == 0 {
            return Err(Error::invalid("state dimension and horizon must be positive"));
        }
        let vecs = |v: &[Vec<f64>], len: usize, dim: usize, what: &str| -> Result<Vec<DVector<f64>>> {
            if v.len() != len || v.iter().any(|x| x.len() != dim) {
                return Err(Error::dims(format!("{what} must have {len} entries of length {dim}")));
            }
            Ok(v.iter().map(|x| DVector::from_column_slice(x)).collect())
        };
        let mu_s = vecs(&mu_s, h, n, "mu_s")?;
        let mu_a = vecs(&mu_a, h, m, "mu_a")?;
        if beta_s.len() != h - 1 || beta_a.len() != h - 1 {
            return Err(Error::dims(format!("beta_s and beta_a need {} periods", h - 1)));
        }
        let beta_s = beta_s.iter().map(|b| matrix(b, n, n, "beta_s")).collect::<Result<Vec<_>>>()?;
        let beta_a = beta_a.iter().map(|b| matrix(b, m, n, "beta_a")).collect::<Result<Vec<_>>>()?;
        if s0.len() != n {
            return Err(Error::dims("s0 must have length n"));
        }
        let dim = n * h;
        let cov = match residual {
            ResidualSpec::Diagonal { sd } => {
                if sd.len() != h || sd.iter().any(|x| x.len() != n) {
                    return Err(Error::dims("diagonal residual sd must be H x n"));
                }
                let mut c = DMatrix::zeros(dim, dim);
                for t in 0..h {
                    for k in 0..n {
                        c[(t * n + k, t * n + k)] = sd[t][k] * sd[t][k];
                    }
                }
                c
            }
            ResidualSpec::Blocks { cov } => {
                if cov.len() != h {
                    return Err(Error::dims("residual blocks must have H entries"));
                }
                let mut c = DMatrix::zeros(dim, dim);
                for (t, b) in cov.iter().enumerate() {
                    let b = matrix(b, n, n, "residual block")?;
                    c.view_mut((t * n, t * n), (n, n)).copy_from(&b);
                }
                c
            }
            ResidualSpec::Full { cov } => matrix(&cov, dim, dim, "residual covariance")?,
        };
        let correlated = Arc::new(CorrelatedNoise::new(n, h, cov)?);
        let labels = |given: Option<Vec<String>>, len: usize, prefix: &str| -> Result<Vec<String>> {
            match given {
                Some(l) if l.len() == len => Ok(l),
                Some(_) => Err(Error::dims(format!("{prefix} labels must have {len} entries"))),
                None => Ok((1..=len).map(|i| format!("{prefix}{i}")).collect()),
            }
        };
        Ok(Self {
            n,
            m,
            horizon: h,
            state_labels: labels(state_labels, n, "s")?,
            action_labels: labels(action_labels, m, "a")?,
            s0,
            mu_s,
            mu_a,
            beta_s,
            beta_a,
            noise: NoiseSpec::Correlated(correlated.clone()),
            correlated,
        })
    }
}

impl From<LinearGaussianModel> for LinearGaussianSpec {
    fn from(m: LinearGaussianModel) -> Self {
        let cov = m.correlated.cov();
        let block_diagonal = (0..m.horizon).all(|i| {
            (0..m.horizon).all(|j| i == j || m.correlated.block(i + 1, j + 1).iter().all(|v| *v == 0.0))
        });
        let residual = if block_diagonal {
            ResidualSpec::Blocks { cov: (1..=m.horizon).map(|t| rows_of(&m.correlated.block(t, t))).collect() }
        } else {
            ResidualSpec::Full { cov: rows_of(cov) }
        };
        LinearGaussianSpec {
            n: m.n,
            m: m.m,
            horizon: m.horizon,
            state_labels: Some(m.state_labels),
            action_labels: Some(m.action_labels),
            s0: m.s0,
            mu_s: m.mu_s.iter().map(|v| v.iter().copied().collect()).collect(),
            mu_a: m.mu_a.iter().map(|v| v.iter().copied().collect()).collect(),
            beta_s: m.beta_s.iter().map(rows_of).collect(),
            beta_a: m.beta_a.iter().map(rows_of).collect(),
            residual,
        }
    }
}

impl LinearGaussianModel {
    pub fn from_spec(spec: LinearGaussianSpec) -> Result<Self> {
        Self::try_from(spec)
    }

    pub fn to_spec(&self) -> LinearGaussianSpec {
        self.clone().into()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s0(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.s0)
    }

    /// Mean state for 1-based period `t` in `1..=H`.
    pub fn mu_s(&self, t: usize) -> &DVector<f64> {
        &self.mu_s[t - 1]
    }

    pub fn mu_a(&self, t: usize) -> &DVector<f64> {
        &self.mu_a[t - 1]
    }

    /// Transition coefficients for 1-based period `t` in `1..H`.
    pub fn beta_s(&self, t: usize) -> &DMatrix<f64> {
        &self.beta_s[t - 1]
    }

    pub fn beta_a(&self, t: usize) -> &DMatrix<f64> {
        &self.beta_a[t - 1]
    }

    pub fn residuals(&self) -> &CorrelatedNoise {
        &self.correlated
    }

    /// `Cov(e_i, e_j)` for 1-based periods.
    pub fn cov_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.correlated.block(i, j)
    }

    pub fn with_coefficients(&self, beta_s: Vec<DMatrix<f64>>, beta_a: Vec<DMatrix<f64>>) -> Result<Self> {
        if beta_s.len() != self.horizon - 1 || beta_a.len() != self.horizon - 1 {
            return Err(Error::dims("coefficient periods do not match the horizon"));
        }
        if beta_s.iter().any(|b| b.shape() != (self.n, self.n)) || beta_a.iter().any(|b| b.shape() != (self.m, self.n)) {
            return Err(Error::dims("coefficient shapes do not match the model"));
        }
        let mut out = self.clone();
        out.beta_s = beta_s;
        out.beta_a = beta_a;
        Ok(out)
    }

    pub fn with_means(&self, s0: Vec<f64>, mu_s: Vec<DVector<f64>>, mu_a: Vec<DVector<f64>>) -> Result<Self> {
        if s0.len() != self.n || mu_s.len() != self.horizon || mu_a.len() != self.horizon {
            return Err(Error::dims("mean vectors do not match the model"));
        }
        let mut out = self.clone();
        out.s0 = s0;
        out.mu_s = mu_s;
        out.mu_a = mu_a;
        Ok(out)
    }

    pub fn with_residual_cov(&self, cov: DMatrix<f64>) -> Result<Self> {
        let correlated = Arc::new(CorrelatedNoise::new(self.n, self.horizon, cov)?);
        let mut out = self.clone();
        out.noise = NoiseSpec::Correlated(correlated.clone());
        out.correlated = correlated;
        Ok(out)
    }
}

impl PkgModel for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn action_dim(&self) -> usize {
        self.m
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> &[f64] {
        &self.s0
    }

    fn state_labels(&self) -> Vec<String> {
        self.state_labels.clone()
    }

    fn action_labels(&self) -> Vec<String> {
        self.action_labels.clone()
    }

    fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    fn initial(&self, residual: &[f64], out: &mut [f64]) -> Result<()> {
        for ((o, s), e) in out.iter_mut().zip(&self.s0).zip(residual) {
            *o = s + e;
        }
        Ok(())
    }

    fn transition(
        &self,
        t: usize,
        state: &[f64],
        _aux: &mut [f64],
        action: &[f64],
        residual: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let bs = &self.beta_s[t - 1];
        let ba = &self.beta_a[t - 1];
        let ms = &self.mu_s[t - 1];
        let ma = &self.mu_a[t - 1];
        let next_mu = &self.mu_s[t];
        for k in 0..n {
            let mut v = next_mu[k] + residual[k];
            for i in 0..n {
                v += bs[(i, k)] * (state[i] - ms[i]);
            }
            for j in 0..m {
                v += ba[(j, k)] * (action[j] - ma[j]);
            }
            out[k] = v;
        }
        if out[..n].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { period: t + 1 });
        }
        Ok(())
    }
}

impl Parameterized for LinearGaussianModel {
    fn parameter_labels(&self) -> Vec<String> {
        let mut labels = Vec::new();
        for t in 1..self.horizon {
            for i in 0..self.n {
                for k in 0..self.n {
                    labels.push(format!("beta_s[t={t},i={},k={}]", self.state_labels[i], self.state_labels[k]));
                }
            }
            for j in 0..self.m {
                for k in 0..self.n {
                    labels.push(format!("beta_a[t={t},j={},k={}]", self.action_labels[j], self.state_labels[k]));
                }
            }
        }
        labels
    }

    fn parameters(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity((self.horizon - 1) * (self.n + self.m) * self.n);
        for t in 0..self.horizon - 1 {
            for i in 0..self.n {
                for k in 0..self.n {
                    w.push(self.beta_s[t][(i, k)]);
                }
            }
            for j in 0..self.m {
                for k in 0..self.n {
                    w.push(self.beta_a[t][(j, k)]);
                }
            }
        }
        w
    }

    fn with_parameters(&self, w: &[f64]) -> Result<Self> {
        let (n, m) = (self.n, self.m);
        let per = (n + m) * n;
        if w.len() != per * (self.horizon - 1) {
            return Err(Error::dims(format!("expected {} parameters, got {}", per * (self.horizon - 1), w.len())));
        }
        let mut out = self.clone();
        for t in 0..self.horizon - 1 {
            let base = &w[t * per..(t + 1) * per];
            out.beta_s[t] = DMatrix::from_row_slice(n, n, &base[..n * n]);
            out.beta_a[t] = DMatrix::from_row_slice(m, n, &base[n * n..]);
        }
        Ok(out)
    }
}
