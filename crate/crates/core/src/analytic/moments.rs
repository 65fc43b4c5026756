//! Closed-form output moments of a linear Gaussian model under a linear policy.
//!
//! With model means `mu^s_t, mu^a_t` and a policy anchored at `nu^s_t, nu^a_t`,
//! the action is `a_t = mu^a_t + theta_t^T ds_t + k_t` with offset
//! `k_t = (nu^a_t - mu^a_t) + theta_t^T (mu^s_t - nu^s_t)`, so the mean
//! deviation follows `m_1 = s_0 - mu^s_1` and
//! `m_{t+1} = C_t m_t + beta_a,t^T k_t`. Offsets vanish when the policy is
//! anchored at the model means; they never affect covariances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::covariance::{reward_variance, state_covariance, state_covariance_direct};
use super::pathway::{pathway_from_coefficients, pathway_from_start, period_maps, reward_loadings, LinearReward};
use crate::model::{LinearGaussianModel, LinearPolicy, PkgModel};

/// How pathway products and covariances are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathwayVariant {
    /// `R_{1,t}` and `Cov(s_p, s_q)` by one-step recursions.
    Reuse,
    /// Every product and double sum recomputed from scratch.
    BruteForce,
    /// Like `Reuse`, and successive prefixes of a walk share cached products.
    Incremental,
}

impl PathwayVariant {
    pub fn name(self) -> &'static str {
        match self {
            PathwayVariant::Reuse => "reuse",
            PathwayVariant::BruteForce => "brute-force",
            PathwayVariant::Incremental => "incremental",
        }
    }
}

/// Action offsets `k_1, .., k_H` of a policy relative to the model means;
/// `None` when the policy is anchored at the model means.
pub fn policy_offsets(model: &LinearGaussianModel, policy: &LinearPolicy) -> Option<Vec<DVector<f64>>> {
    let h = model.horizon();
    if (1..=h).all(|t| policy.mu_s(t) == model.mu_s(t) && policy.mu_a(t) == model.mu_a(t)) {
        return None;
    }
    let offsets: Vec<DVector<f64>> = (1..=h)
        .map(|t| {
            let mut k = policy.mu_a(t) - model.mu_a(t);
            if t < h {
                k += policy.theta(t).transpose() * (model.mu_s(t) - policy.mu_s(t));
            }
            k
        })
        .collect();
    Some(offsets)
}

/// Drift `beta_a,t^T k_t` entering `m_{t+1}`.
pub(crate) fn offset_drift(model: &LinearGaussianModel, offsets: Option<&[DVector<f64>]>) -> Option<Vec<DVector<f64>>> {
    let offsets = offsets?;
    Some((1..model.horizon()).map(|t| model.beta_a(t).tr_mul(&offsets[t - 1])).collect())
}

/// Means of `s_t` (flattened) followed by `E[J]`, from the mean deviations `m_1, .., m_H`.
pub(crate) fn means_from_deviations(
    model: &LinearGaussianModel,
    policy: &LinearPolicy,
    reward: &LinearReward,
    offsets: Option<&[DVector<f64>]>,
    dev: &[DVector<f64>],
    out: &mut [f64],
) {
    let (n, h) = (model.n(), model.horizon());
    let (alpha, consts) = reward_loadings(model, policy.thetas(), reward);
    let mut j = 0.0;
    for t in 1..=h {
        let d = &dev[t - 1];
        for k in 0..n {
            out[(t - 1) * n + k] = model.mu_s(t)[k] + d[k];
        }
        j += consts[t - 1] + alpha[t - 1].tr_dot(d);
        if let Some(k) = offsets {
            j += reward.b[t - 1].dot(&k[t - 1]);
        }
    }
    out[h * n] = j;
}

/// Mean deviations from `R_{1,t-1}` and the accumulated offset drift.
pub(crate) fn deviations_from_paths(
    model: &LinearGaussianModel,
    maps: &[DMatrix<f64>],
    paths: &[DMatrix<f64>],
    drift: Option<&[DVector<f64>]>,
) -> Vec<DVector<f64>> {
    let d0 = model.s0() - model.mu_s(1);
    let mut shift = DVector::zeros(model.n());
    let mut out = Vec::with_capacity(paths.len());
    for t in 1..=paths.len() {
        if let (Some(u), true) = (drift, t > 1) {
            shift = &maps[t - 2] * shift + &u[t - 2];
        }
        out.push(&paths[t - 1] * &d0 + &shift);
    }
    out
}

/// `E[s_t^k]` and `E[J]`.
pub fn output_means(
    model: &LinearGaussianModel,
    policy: &LinearPolicy,
    reward: &LinearReward,
    variant: PathwayVariant,
    out: &mut [f64],
) {
    let (n, h) = (model.n(), model.horizon());
    let theta = policy.thetas();
    let offsets = policy_offsets(model, policy);
    let drift = offset_drift(model, offsets.as_deref());
    let dev = match variant {
        PathwayVariant::BruteForce => {
            let d0 = model.s0() - model.mu_s(1);
            (1..=h)
                .map(|t| {
                    let mut d = pathway_from_coefficients(model, theta, 1, t - 1) * &d0;
                    if let Some(u) = &drift {
                        for j in 1..t {
                            d += pathway_from_coefficients(model, theta, j + 1, t - 1) * &u[j - 1];
                        }
                    }
                    d
                })
                .collect()
        }
        _ => {
            let maps = period_maps(model, theta);
            deviations_from_paths(model, &maps, &pathway_from_start(&maps, n), drift.as_deref())
        }
    };
    means_from_deviations(model, policy, reward, offsets.as_deref(), &dev, out);
}

/// `Var(s_t^k)` and `Var(J)`.
pub fn output_variances(
    model: &LinearGaussianModel,
    policy: &LinearPolicy,
    reward: &LinearReward,
    variant: PathwayVariant,
    out: &mut [f64],
) {
    let (n, h) = (model.n(), model.horizon());
    let table = match variant {
        PathwayVariant::BruteForce => state_covariance_direct(model, policy.thetas()),
        _ => state_covariance(model, &period_maps(model, policy.thetas())),
    };
    for t in 1..=h {
        let block = table.get(t, t);
        for k in 0..n {
            out[(t - 1) * n + k] = block[(k, k)];
        }
    }
    let (alpha, _) = reward_loadings(model, policy.thetas(), reward);
    out[h * n] = reward_variance(&alpha, &table);
}
