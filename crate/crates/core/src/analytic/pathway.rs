//! Pathway products of a linear Gaussian model under a linear policy.
//!
//! With `C_t = beta_s,t^T + beta_a,t^T theta_t^T` (1-based `t < H`), the state
//! deviations obey `ds_{t+1} = C_t ds_t + e_{t+1}` and
//!
//! ```text
//! R_{i,t} = C_t C_{t-1} .. C_i,   R_{i,i-1} = I,   R_{i,t} = 0 for t < i-1.
//! ```

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::model::{LinearGaussianModel, PkgModel, RewardSpec};

/// `C_t` for one period.
pub fn period_map(model: &LinearGaussianModel, theta: &[DMatrix<f64>], t: usize) -> DMatrix<f64> {
    let mut c = &theta[t - 1] * model.beta_a(t);
    c += model.beta_s(t);
    c.transpose()
}

/// `C_1, .., C_{H-1}`.
pub fn period_maps(model: &LinearGaussianModel, theta: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    (1..model.horizon()).map(|t| period_map(model, theta, t)).collect()
}

pub fn check_gains(model: &LinearGaussianModel, theta: &[DMatrix<f64>]) -> Result<()> {
    if theta.len() + 1 != model.horizon() {
        return Err(Error::dims(format!("expected {} gain matrices, got {}", model.horizon() - 1, theta.len())));
    }
    if theta.iter().any(|t| t.shape() != (model.n(), model.m())) {
        return Err(Error::dims("gain matrices must be n x m"));
    }
    Ok(())
}

/// `R_{i,t}` by direct multiplication of the stored maps (`maps[t-1] = C_t`).
pub fn pathway_direct(maps: &[DMatrix<f64>], n: usize, i: usize, t: usize) -> DMatrix<f64> {
    if t + 1 < i {
        return DMatrix::zeros(n, n);
    }
    let mut r = DMatrix::identity(n, n);
    for j in i..=t {
        r = &maps[j - 1] * r;
    }
    r
}

/// `R_{i,t}` multiplied out from the model coefficients, rebuilding each `C_j`.
pub fn pathway_from_coefficients(model: &LinearGaussianModel, theta: &[DMatrix<f64>], i: usize, t: usize) -> DMatrix<f64> {
    let n = model.n();
    if t + 1 < i {
        return DMatrix::zeros(n, n);
    }
    let mut r = DMatrix::identity(n, n);
    for j in i..=t {
        r = period_map(model, theta, j) * r;
    }
    r
}

/// `R_{1,0}, R_{1,1}, .., R_{1,H-1}` by the forward recursion `R_{1,t} = C_t R_{1,t-1}`.
pub fn pathway_from_start(maps: &[DMatrix<f64>], n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(maps.len() + 1);
    out.push(DMatrix::identity(n, n));
    for c in maps {
        let next = c * out.last().expect("non-empty");
        out.push(next);
    }
    out
}

/// Linear reward coefficients `r_t = m_t + b_t^T a_t + c_t^T s_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReward {
    pub m: Vec<f64>,
    pub b: Vec<DVector<f64>>,
    pub c: Vec<DVector<f64>>,
}

impl LinearReward {
    pub fn from_spec(spec: &RewardSpec) -> Result<Self> {
        match spec {
            RewardSpec::Linear { m, b, c } => Ok(Self {
                m: m.clone(),
                b: b.iter().map(|v| DVector::from_column_slice(v)).collect(),
                c: c.iter().map(|v| DVector::from_column_slice(v)).collect(),
            }),
            RewardSpec::Fermentation { .. } => {
                Err(Error::invalid("the analytic engine needs a linear reward"))
            }
        }
    }

    pub fn to_spec(&self) -> RewardSpec {
        RewardSpec::Linear {
            m: self.m.clone(),
            b: self.b.iter().map(|v| v.iter().copied().collect()).collect(),
            c: self.c.iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }

    pub fn check(&self, model: &LinearGaussianModel) -> Result<()> {
        self.to_spec().validate(model.horizon(), model.n(), model.m())
    }
}

/// Reward loadings `alpha_t = b_t^T theta_t^T + c_t^T` (with no feedback at `t = H`)
/// and constants `m_t + b_t^T mu^a_t + c_t^T mu^s_t`, for `t = 1..H`.
pub fn reward_loadings(
    model: &LinearGaussianModel,
    theta: &[DMatrix<f64>],
    reward: &LinearReward,
) -> (Vec<RowDVector<f64>>, Vec<f64>) {
    let h = model.horizon();
    let mut alpha = Vec::with_capacity(h);
    let mut consts = Vec::with_capacity(h);
    for t in 1..=h {
        let a = if t < h { &theta[t - 1] * &reward.b[t - 1] + &reward.c[t - 1] } else { reward.c[t - 1].clone() };
        alpha.push(a.transpose());
        consts.push(reward.m[t - 1] + reward.b[t - 1].dot(model.mu_a(t)) + reward.c[t - 1].dot(model.mu_s(t)));
    }
    (alpha, consts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recursion_matches_direct_products() {
        let maps: Vec<DMatrix<f64>> = (0..5)
            .map(|t| DMatrix::from_fn(3, 3, |i, j| ((i * 3 + j + t) as f64 * 0.37).sin()))
            .collect();
        let rec = pathway_from_start(&maps, 3);
        for t in 0..=5 {
            assert!((&rec[t] - pathway_direct(&maps, 3, 1, t)).abs().max() < 1e-12);
        }
        assert_eq!(pathway_direct(&maps, 3, 4, 3), DMatrix::identity(3, 3));
        assert_eq!(pathway_direct(&maps, 3, 5, 2), DMatrix::zeros(3, 3));
    }
}
