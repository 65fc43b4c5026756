//! Closed-form Shapley values of the residuals `e_h^k`.
//!
//! Every output is linear in the residuals, `Y = const + sum_l a_l e_l`, with
//! `a_{(h,k)} = [R_{h,t-1}]_{.,k}` for the state `s_t` (`h <= t`) and
//! `sum_{t >= h} alpha_t R_{h,t-1} 1_k` for the cumulative reward.
//!
//! Pinning `e_l` at `lambda sd_l` makes the expectation value function additive,
//! so `Sh_l = a_l lambda sd_l`. In variance mode `g(U) = a_U^T Sigma_UU a_U`,
//! whose Shapley values are `Sh_l = a_l (Sigma a)_l`.

use nalgebra::{DMatrix, DVector};

use super::moments::{output_means, output_variances, PathwayVariant};
use super::pathway::{period_maps, reward_loadings, LinearReward};
use super::policy::check_policy;
use crate::error::{Error, Result};
use crate::model::{output_labels, LinearGaussianModel, LinearPolicy, PkgModel};
use crate::shapley::{SvReport, ValueFunction, ValueMode};

/// Loadings `L[output][input]` of all outputs on the residuals.
pub fn residual_loadings(model: &LinearGaussianModel, theta: &[DMatrix<f64>], reward: &LinearReward) -> DMatrix<f64> {
    let (n, h) = (model.n(), model.horizon());
    let maps = period_maps(model, theta);
    let (alpha, _) = reward_loadings(model, theta, reward);
    let mut l = DMatrix::zeros(h * n + 1, h * n);
    for src in 1..=h {
        let mut path = DMatrix::<f64>::identity(n, n);
        for t in src..=h {
            if t > src {
                path = &maps[t - 2] * path;
            }
            l.view_mut(((t - 1) * n, (src - 1) * n), (n, n)).copy_from(&path);
            let row = &alpha[t - 1] * &path;
            for k in 0..n {
                l[(h * n, (src - 1) * n + k)] += row[k];
            }
        }
    }
    l
}

fn input_labels(model: &LinearGaussianModel) -> Vec<String> {
    let labels = model.state_labels();
    (1..=model.horizon()).flat_map(|t| labels.iter().map(move |l| format!("e[t={t},k={l}]"))).collect()
}

fn check_ensemble(models: &[LinearGaussianModel], policy: &LinearPolicy, reward: &LinearReward) -> Result<()> {
    let first = models.first().ok_or(Error::EmptyEnsemble)?;
    if models.iter().any(|m| (m.n(), m.m(), m.horizon()) != (first.n(), first.m(), first.horizon())) {
        return Err(Error::dims("ensemble members differ in shape"));
    }
    check_policy(models, policy)?;
    reward.check(first)
}

fn average(models: &[LinearGaussianModel], per_model: impl Fn(&LinearGaussianModel) -> (DMatrix<f64>, Vec<f64>)) -> SvReport {
    let first = &models[0];
    let (inputs, outputs) = (first.horizon() * first.n(), first.horizon() * first.n() + 1);
    let mut sv = DMatrix::zeros(inputs, outputs);
    let mut span = vec![0.0; outputs];
    for m in models {
        let (s, sp) = per_model(m);
        sv += s;
        span.iter_mut().zip(&sp).for_each(|(a, b)| *a += b);
    }
    let q = models.len() as f64;
    let rows = (0..inputs).map(|i| (0..outputs).map(|j| sv[(i, j)] / q).collect()).collect();
    span.iter_mut().for_each(|s| *s /= q);
    let mut report = SvReport::exact(input_labels(first), output_labels(first), rows, span);
    report.samples = models.len();
    report
}

/// Expectation-mode Shapley values, averaged over the ensemble.
pub fn random_factor_sv_predictive(
    models: &[LinearGaussianModel],
    policy: &LinearPolicy,
    reward: &LinearReward,
    lambda: f64,
) -> Result<SvReport> {
    check_ensemble(models, policy, reward)?;
    let theta = policy.thetas();
    Ok(average(models, |model| {
        let sd = model.residuals().sd();
        let l = residual_loadings(model, theta, reward);
        let sv = DMatrix::from_fn(l.ncols(), l.nrows(), |i, o| l[(o, i)] * lambda * sd[i]);
        (sv, pinned_span(model, theta, reward, lambda))
    }))
}

/// `g(O) - g(empty)` by propagating the pinned residual shift forward.
fn pinned_span(model: &LinearGaussianModel, theta: &[DMatrix<f64>], reward: &LinearReward, lambda: f64) -> Vec<f64> {
    let (n, h) = (model.n(), model.horizon());
    let sd = model.residuals().sd();
    let maps = period_maps(model, theta);
    let (alpha, _) = reward_loadings(model, theta, reward);
    let shift = |t: usize| DVector::from_fn(n, |k, _| lambda * sd[(t - 1) * n + k]);
    let mut out = vec![0.0; h * n + 1];
    let mut dev = shift(1);
    for t in 1..=h {
        if t > 1 {
            dev = &maps[t - 2] * dev + shift(t);
        }
        out[(t - 1) * n..t * n].copy_from_slice(dev.as_slice());
        out[h * n] += (&alpha[t - 1] * &dev)[0];
    }
    out
}

/// Variance-mode Shapley values, averaged over the ensemble.
///
/// State outputs use `Sh_l = a_l (Sigma a)_l`. The cumulative reward is
/// assembled period by period from the per-reward loadings `A_p`: a diagonal
/// sum over `p >= h`, pairs with `p < h <= p'`, and pairs `h <= p < p'`.
pub fn random_factor_sv_variance(
    models: &[LinearGaussianModel],
    policy: &LinearPolicy,
    reward: &LinearReward,
) -> Result<SvReport> {
    check_ensemble(models, policy, reward)?;
    let theta = policy.thetas();
    Ok(average(models, |model| {
        let (n, h) = (model.n(), model.horizon());
        let cov = model.residuals().cov();
        let l = residual_loadings(model, theta, reward);
        let lc = &l * cov;
        let mut sv = DMatrix::from_fn(h * n, h * n + 1, |i, o| l[(o, i)] * lc[(o, i)]);
        let j = reward_sv_by_periods(model, theta, reward, cov);
        sv.column_mut(h * n).copy_from(&j);
        let mut span = vec![0.0; h * n + 1];
        output_variances(model, policy, reward, PathwayVariant::Reuse, &mut span);
        (sv, span)
    }))
}

fn reward_sv_by_periods(
    model: &LinearGaussianModel,
    theta: &[DMatrix<f64>],
    reward: &LinearReward,
    cov: &DMatrix<f64>,
) -> DVector<f64> {
    let (n, h) = (model.n(), model.horizon());
    let maps = period_maps(model, theta);
    let (alpha, _) = reward_loadings(model, theta, reward);
    // a[p-1] = loading of r_p on all residuals; zero for residuals after p.
    let mut a = vec![DVector::zeros(h * n); h];
    for (p, ap) in a.iter_mut().enumerate().map(|(i, v)| (i + 1, v)) {
        let mut path = DMatrix::<f64>::identity(n, n);
        for src in (1..=p).rev() {
            if src < p {
                path = &path * &maps[src - 1];
            }
            let row = &alpha[p - 1] * &path;
            for k in 0..n {
                ap[(src - 1) * n + k] = row[k];
            }
        }
    }
    let g: Vec<DVector<f64>> = a.iter().map(|ap| cov * ap).collect();
    let mut out = DVector::zeros(h * n);
    for hh in 1..=h {
        for k in 0..n {
            let l = (hh - 1) * n + k;
            let mut diag = 0.0;
            let mut before = 0.0;
            let mut after = 0.0;
            for p in hh..=h {
                diag += a[p - 1][l] * g[p - 1][l];
                for q in 1..hh {
                    before += a[p - 1][l] * g[q - 1][l];
                }
                for q in p + 1..=h {
                    after += a[p - 1][l] * g[q - 1][l] + a[q - 1][l] * g[p - 1][l];
                }
            }
            out[l] = diag + before + after;
        }
    }
    out
}

/// The residual set function itself, for exhaustive or permutation estimation.
pub struct RandomFactorExact<'a> {
    pub model: &'a LinearGaussianModel,
    pub reward: &'a LinearReward,
    pub mode: ValueMode,
    pub lambda: f64,
    loadings: DMatrix<f64>,
    base_mean: Vec<f64>,
}

impl<'a> RandomFactorExact<'a> {
    pub fn new(model: &'a LinearGaussianModel, policy: &LinearPolicy, reward: &'a LinearReward, mode: ValueMode) -> Result<Self> {
        check_ensemble(std::slice::from_ref(model), policy, reward)?;
        let mut base_mean = vec![0.0; model.horizon() * model.n() + 1];
        output_means(model, policy, reward, PathwayVariant::Reuse, &mut base_mean);
        let loadings = residual_loadings(model, policy.thetas(), reward);
        Ok(Self { model, reward, mode, lambda: 1.0, loadings, base_mean })
    }
}

impl ValueFunction for RandomFactorExact<'_> {
    fn num_inputs(&self) -> usize {
        self.loadings.ncols()
    }

    fn num_outputs(&self) -> usize {
        self.loadings.nrows()
    }

    fn input_labels(&self) -> Vec<String> {
        input_labels(self.model)
    }

    fn output_labels(&self) -> Vec<String> {
        output_labels(self.model)
    }

    fn evaluate(&self, _sample: usize, _walk: usize, members: &[bool], out: &mut [f64]) -> Result<()> {
        let sd = self.model.residuals().sd();
        let cov = self.model.residuals().cov();
        let set: Vec<usize> = (0..members.len()).filter(|&i| members[i]).collect();
        for (o, v) in out.iter_mut().enumerate() {
            *v = match self.mode {
                ValueMode::Expectation => {
                    self.base_mean[o] + set.iter().map(|&i| self.loadings[(o, i)] * self.lambda * sd[i]).sum::<f64>()
                }
                ValueMode::Variance => {
                    let mut acc = 0.0;
                    for &i in &set {
                        for &j in &set {
                            acc += self.loadings[(o, i)] * cov[(i, j)] * self.loadings[(o, j)];
                        }
                    }
                    acc
                }
            };
        }
        Ok(())
    }
}
