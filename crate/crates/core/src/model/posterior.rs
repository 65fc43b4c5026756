//! Posterior ensembles of model parameters.
//!
//! Linear Gaussian models get a conjugate normal-inverse-gamma regression per
//! state equation and period. The kinetic model's uncertain parameters are
//! sampled with component-wise random-walk Metropolis under Gaussian priors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kinetics::{KineticModel, UncertainParams};
use super::linear::LinearGaussianModel;
use super::noise::{psd_factor, NoiseSpec};
use super::{Parameterized, PkgModel, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorEnsemble<M> {
    pub provenance: String,
    pub seed: u64,
    pub members: Vec<M>,
}

impl<M> PosteriorEnsemble<M> {
    pub fn new(provenance: impl Into<String>, seed: u64, members: Vec<M>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Self { provenance: provenance.into(), seed, members })
    }

    /// A degenerate ensemble holding one fixed model.
    pub fn single(model: M) -> Self {
        Self { provenance: "fixed".into(), seed: 0, members: vec![model] }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl<M: Parameterized> PosteriorEnsemble<M> {
    pub fn parameter_mean(&self) -> Vec<f64> {
        let mut acc = self.members[0].parameters().iter().map(|_| 0.0).collect::<Vec<f64>>();
        for m in &self.members {
            for (a, w) in acc.iter_mut().zip(m.parameters()) {
                *a += w;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.members.len() as f64);
        acc
    }
}

/// An ensemble file of either model family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EnsembleFile {
    LinearGaussian(PosteriorEnsemble<LinearGaussianModel>),
    Kinetic(PosteriorEnsemble<KineticModel>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoisePrior {
    Known { variance: f64 },
    InverseGamma { shape: f64, rate: f64 },
}

/// `beta | sigma^2 ~ N(mean 1, sigma^2 variance I)`, `sigma^2 ~ IG(shape, rate)`;
/// with a known noise variance the coefficient prior is `N(mean 1, variance I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePrior {
    pub coef_mean: f64,
    pub coef_variance: f64,
    pub noise: NoisePrior,
}

impl Default for ConjugatePrior {
    fn default() -> Self {
        Self { coef_mean: 0.0, coef_variance: 100.0, noise: NoisePrior::InverseGamma { shape: 2.0, rate: 0.01 } }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPosterior {
    pub mean: DVector<f64>,
    /// Coefficient covariance (known variance) or its scale `V_n` (inverse-gamma).
    pub scale: DMatrix<f64>,
    pub noise: NoisePrior,
}

impl RegressionPosterior {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, prior: &ConjugatePrior) -> Result<Self> {
        let p = x.ncols();
        if x.nrows() != y.len() {
            return Err(Error::dims("design and response lengths differ"));
        }
        if !(prior.coef_variance > 0.0) {
            return Err(Error::invalid("prior coefficient variance must be positive"));
        }
        let prec0 = 1.0 / prior.coef_variance;
        let m0 = DVector::from_element(p, prior.coef_mean);
        let xtx = x.transpose() * x;
        let xty = x.transpose() * y;
        let invert = |m: DMatrix<f64>| m.cholesky().map(|c| c.inverse()).ok_or(Error::NotPositiveSemiDefinite);
        match prior.noise {
            NoisePrior::Known { variance } => {
                if !(variance > 0.0) {
                    return Err(Error::invalid("noise variance must be positive"));
                }
                let cov = invert(DMatrix::identity(p, p) * prec0 + &xtx / variance)?;
                let mean = &cov * (&m0 * prec0 + &xty / variance);
                Ok(Self { mean, scale: cov, noise: prior.noise })
            }
            NoisePrior::InverseGamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0) {
                    return Err(Error::invalid("inverse-gamma shape and rate must be positive"));
                }
                let vn = invert(DMatrix::identity(p, p) * prec0 + &xtx)?;
                let mean = &vn * (&m0 * prec0 + &xty);
                let quad_prior = prec0 * m0.dot(&m0);
                let prec_n = DMatrix::identity(p, p) * prec0 + &xtx;
                let quad_post = mean.dot(&(&prec_n * &mean));
                let rate_n = rate + 0.5 * (y.dot(y) + quad_prior - quad_post).max(0.0);
                let shape_n = shape + 0.5 * y.len() as f64;
                Ok(Self { mean, scale: vn, noise: NoisePrior::InverseGamma { shape: shape_n, rate: rate_n } })
            }
        }
    }

    /// Posterior mean of the noise variance (infinite when undefined).
    pub fn noise_variance_mean(&self) -> f64 {
        match self.noise {
            NoisePrior::Known { variance } => variance,
            NoisePrior::InverseGamma { shape, rate } if shape > 1.0 => rate / (shape - 1.0),
            NoisePrior::InverseGamma { .. } => f64::INFINITY,
        }
    }

    pub fn sample<R: Rng>(&self, r: &mut R) -> Result<(DVector<f64>, f64)> {
        let (variance, cov) = match self.noise {
            NoisePrior::Known { variance } => (variance, self.scale.clone()),
            NoisePrior::InverseGamma { shape, rate } => {
                let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::invalid(e.to_string()))?;
                let v = 1.0 / r.sample::<f64, _>(g);
                (v, &self.scale * v)
            }
        };
        let l = psd_factor(&cov)?;
        let z = DVector::from_fn(self.mean.len(), |_, _| r.sample::<f64, _>(StandardNormal));
        Ok((&self.mean + l * z, variance))
    }
}

fn check_records(records: &[TrajectoryRecord], h: usize, n: usize, m: usize) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no trajectories".into()));
    }
    for rec in records {
        if rec.states.len() != h || rec.actions.len() + 1 != h {
            return Err(Error::InsufficientData(format!(
                "batch {} covers {} periods, the model needs {h}",
                rec.batch,
                rec.states.len()
            )));
        }
        if rec.states.iter().any(|s| s.len() != n) || rec.actions.iter().any(|a| a.len() != m) {
            return Err(Error::dims(format!("batch {} has the wrong state or action width", rec.batch)));
        }
    }
    Ok(())
}

fn column_mean(rows: impl Iterator<Item = Vec<f64>>, dim: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(dim);
    let mut count = 0usize;
    for r in rows {
        acc += DVector::from_vec(r);
        count += 1;
    }
    acc / count as f64
}

/// Per-period, per-equation regression posteriors together with the plug-in means.
pub struct LinearFit {
    pub mu_s: Vec<DVector<f64>>,
    pub mu_a: Vec<DVector<f64>>,
    /// `posteriors[t-1][k]` for the equation of `s_{t+1}^k`.
    pub posteriors: Vec<Vec<RegressionPosterior>>,
    /// Pooled residual correlation across equations.
    pub correlation: DMatrix<f64>,
    pub initial_cov: DMatrix<f64>,
}

pub fn linear_regressions(
    records: &[TrajectoryRecord],
    template: &LinearGaussianModel,
    prior: &ConjugatePrior,
) -> Result<LinearFit> {
    let (n, m, h) = (template.n(), template.m(), template.horizon());
    check_records(records, h, n, m)?;
    let r = records.len();
    let mu_s: Vec<DVector<f64>> =
        (0..h).map(|t| column_mean(records.iter().map(|rec| rec.states[t].clone()), n)).collect();
    let mut mu_a: Vec<DVector<f64>> =
        (0..h - 1).map(|t| column_mean(records.iter().map(|rec| rec.actions[t].clone()), m)).collect();
    mu_a.push(template.mu_a(h).clone());

    let mut posteriors = Vec::with_capacity(h - 1);
    let mut residuals: Vec<DVector<f64>> = Vec::new();
    for t in 0..h - 1 {
        let x = DMatrix::from_fn(r, n + m, |row, col| {
            let rec = &records[row];
            if col < n {
                rec.states[t][col] - mu_s[t][col]
            } else {
                rec.actions[t][col - n] - mu_a[t][col - n]
            }
        });
        let mut per_k = Vec::with_capacity(n);
        let mut res = DMatrix::zeros(r, n);
        for k in 0..n {
            let y = DVector::from_fn(r, |row, _| records[row].states[t + 1][k] - mu_s[t + 1][k]);
            let post = RegressionPosterior::fit(&x, &y, prior)?;
            res.set_column(k, &(&y - &x * &post.mean));
            per_k.push(post);
        }
        for row in 0..r {
            residuals.push(res.row(row).transpose());
        }
        posteriors.push(per_k);
    }

    let correlation = pooled_correlation(&residuals, n);
    let initial_cov = if r >= 2 {
        let mut c = DMatrix::zeros(n, n);
        for rec in records {
            let d = DVector::from_column_slice(&rec.states[0]) - &mu_s[0];
            c += &d * d.transpose();
        }
        c / (r - 1) as f64
    } else {
        template.cov_block(1, 1)
    };
    Ok(LinearFit { mu_s, mu_a, posteriors, correlation, initial_cov })
}

fn pooled_correlation(residuals: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    if residuals.len() < 2 {
        return DMatrix::identity(n, n);
    }
    let mut c = DMatrix::zeros(n, n);
    for e in residuals {
        c += e * e.transpose();
    }
    c /= residuals.len() as f64;
    if (0..n).any(|k| !(c[(k, k)] > 1e-300)) {
        return DMatrix::identity(n, n);
    }
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt() })
}

/// Draw `count` linear Gaussian models from the conjugate posterior.
pub fn fit_linear_posterior(
    records: &[TrajectoryRecord],
    template: &LinearGaussianModel,
    prior: &ConjugatePrior,
    count: usize,
    seed: u64,
) -> Result<PosteriorEnsemble<LinearGaussianModel>> {
    if count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let (n, m, h) = (template.n(), template.m(), template.horizon());
    let fit = linear_regressions(records, template, prior)?;
    let base = template.with_means(fit.mu_s[0].iter().copied().collect(), fit.mu_s.clone(), fit.mu_a.clone())?;
    let mut members = Vec::with_capacity(count);
    for q in 0..count {
        let mut r = rng::stream(seed, &[rng::domain::POSTERIOR, q as u64]);
        let mut beta_s = Vec::with_capacity(h - 1);
        let mut beta_a = Vec::with_capacity(h - 1);
        let mut cov = DMatrix::zeros(n * h, n * h);
        cov.view_mut((0, 0), (n, n)).copy_from(&fit.initial_cov);
        for t in 0..h - 1 {
            let mut bs = DMatrix::zeros(n, n);
            let mut ba = DMatrix::zeros(m, n);
            let mut sd = DVector::zeros(n);
            for k in 0..n {
                let (coef, var) = fit.posteriors[t][k].sample(&mut r)?;
                for i in 0..n {
                    bs[(i, k)] = coef[i];
                }
                for j in 0..m {
                    ba[(j, k)] = coef[n + j];
                }
                sd[k] = var.sqrt();
            }
            let block = DMatrix::from_fn(n, n, |i, j| sd[i] * fit.correlation[(i, j)] * sd[j]);
            cov.view_mut(((t + 1) * n, (t + 1) * n), (n, n)).copy_from(&block);
            beta_s.push(bs);
            beta_a.push(ba);
        }
        members.push(base.with_coefficients(beta_s, beta_a)?.with_residual_cov(cov)?);
    }
    PosteriorEnsemble::new(format!("conjugate linear regression on {} trajectories", records.len()), seed, members)
}

/// Independent Gaussian priors on the uncertain kinetic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticPrior {
    pub mean: UncertainParams,
    pub sd: UncertainParams,
}

impl Default for KineticPrior {
    fn default() -> Self {
        let mean = UncertainParams::default();
        Self {
            mean,
            sd: UncertainParams {
                mu_max: 0.1 * mean.mu_max,
                beta_lc_max: 0.1 * mean.beta_lc_max,
                m_s: 0.1 * mean.m_s,
                r_l: 0.05,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcSettings {
    pub samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Initial proposal sd as a multiple of the prior sd.
    pub step_scale: f64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self { samples: 200, burn_in: 2000, thin: 5, step_scale: 0.5 }
    }
}

/// Gaussian transition log-likelihood of the records under `model`.
pub fn kinetic_log_likelihood(model: &KineticModel, records: &[TrajectoryRecord]) -> f64 {
    let (kind, scale, dt) = match model.noise() {
        NoiseSpec::Independent { kind, scale, dt } => (*kind, scale.as_slice(), *dt),
        NoiseSpec::Correlated(_) => unreachable!("kinetic noise is independent"),
    };
    let mut ll = 0.0;
    for rec in records {
        let mut lipid = model.spec().initial_lipid;
        for t in 0..rec.actions.len() {
            let s = &rec.states[t];
            let (mean, lipid_next) = model.euler_mean(s, lipid, rec.actions[t][0]);
            for k in 0..5 {
                let sd = NoiseSpec::independent_sd(kind, scale, dt, k, s[k]);
                if sd > 0.0 {
                    let z = (rec.states[t + 1][k] - mean[k]) / sd;
                    ll -= 0.5 * z * z + sd.ln();
                }
            }
            lipid = lipid_next.max(0.0);
        }
    }
    ll
}

fn reflect(x: f64, lo: f64, hi: Option<f64>) -> f64 {
    let mut x = x;
    for _ in 0..64 {
        if x < lo {
            x = 2.0 * lo - x;
        } else if let Some(hi) = hi.filter(|hi| x > *hi) {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
    x.clamp(lo, hi.unwrap_or(f64::INFINITY))
}

/// Sample the uncertain kinetic parameters by Metropolis-within-Gibbs.
///
/// Proposal scales adapt during burn-in towards a 0.44 acceptance rate and are
/// frozen afterwards. Rates are reflected at zero and `r_l` into `[0, 1]`.
pub fn fit_nonlinear_posterior(
    records: &[TrajectoryRecord],
    template: &KineticModel,
    prior: &KineticPrior,
    settings: &McmcSettings,
    seed: u64,
) -> Result<PosteriorEnsemble<KineticModel>> {
    check_records(records, template.horizon(), 5, 1)?;
    if settings.samples == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if settings.thin == 0 || !(settings.step_scale > 0.0) {
        return Err(Error::invalid("thinning and step scale must be positive"));
    }
    let mean = prior.mean.to_array();
    let sd = prior.sd.to_array();
    if sd.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("prior standard deviations must be positive"));
    }
    let log_post = |w: &[f64; 4]| -> f64 {
        let lp: f64 = (0..4).map(|i| -0.5 * ((w[i] - mean[i]) / sd[i]).powi(2)).sum();
        let model = template.with_params(UncertainParams::from_slice(w).expect("four parameters"));
        lp + kinetic_log_likelihood(&model, records)
    };
    let mut r = rng::stream(seed, &[rng::domain::CHAIN]);
    let mut w = mean;
    let mut current = log_post(&w);
    if !current.is_finite() {
        return Err(Error::ChainDiverged("log posterior is not finite at the prior mean".into()));
    }
    let mut log_step = [settings.step_scale.ln(); 4];
    let total = settings.burn_in + settings.samples * settings.thin;
    let mut accepted = 0usize;
    let mut proposals = 0usize;
    let mut members = Vec::with_capacity(settings.samples);
    for iter in 0..total {
        let burning = iter < settings.burn_in;
        for i in 0..4 {
            let mut prop = w;
            let z: f64 = r.sample(StandardNormal);
            prop[i] = reflect(w[i] + z * sd[i] * log_step[i].exp(), 0.0, (i == 3).then_some(1.0));
            let cand = log_post(&prop);
            let u: f64 = r.random();
            let accept = cand.is_finite() && u.ln() < cand - current;
            if accept {
                w = prop;
                current = cand;
            }
            if burning {
                let gain = 1.0 / ((iter + 1) as f64).sqrt();
                log_step[i] += gain * (f64::from(u8::from(accept)) - 0.44);
            } else {
                proposals += 1;
                accepted += usize::from(accept);
            }
        }
        if !burning && (iter - settings.burn_in + 1) % settings.thin == 0 {
            members.push(template.with_params(UncertainParams::from_slice(&w)?));
        }
    }
    if accepted == 0 {
        return Err(Error::ChainDiverged("no proposal was accepted after burn-in".into()));
    }
    PosteriorEnsemble::new(
        format!(
            "random-walk Metropolis on {} trajectories, acceptance {:.3}",
            records.len(),
            accepted as f64 / proposals as f64
        ),
        seed,
        members,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_known_variance_update() {
        let prior = ConjugatePrior { coef_mean: 0.0, coef_variance: 1.0, noise: NoisePrior::Known { variance: 1.0 } };
        let (x, y) = (2.0, 3.0);
        let post = RegressionPosterior::fit(&DMatrix::from_element(1, 1, x), &DVector::from_element(1, y), &prior).unwrap();
        assert!((post.mean[0] - x * y / (1.0 + x * x)).abs() < 1e-15);
        assert!((post.scale[(0, 0)] - 1.0 / (1.0 + x * x)).abs() < 1e-15);
    }

    #[test]
    fn inverse_gamma_update_matches_formulae() {
        let prior = ConjugatePrior { coef_mean: 0.5, coef_variance: 2.0, noise: NoisePrior::InverseGamma { shape: 3.0, rate: 1.0 } };
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]);
        let y = DVector::from_vec(vec![0.8, 2.1, -0.7]);
        let post = RegressionPosterior::fit(&x, &y, &prior).unwrap();
        let prec = 0.5 + 6.0;
        let mean = (0.5 * 0.5 + (0.8 + 4.2 + 0.7)) / prec;
        assert!((post.mean[0] - mean).abs() < 1e-14);
        let rate = 1.0 + 0.5 * (0.64 + 4.41 + 0.49 + 0.5 * 0.25 - prec * mean * mean);
        match post.noise {
            NoisePrior::InverseGamma { shape, rate: r } => {
                assert_eq!(shape, 4.5);
                assert!((r - rate).abs() < 1e-14);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn reflection_stays_in_bounds() {
        assert_eq!(reflect(-0.2, 0.0, Some(1.0)), 0.2);
        assert!((reflect(1.3, 0.0, Some(1.0)) - 0.7).abs() < 1e-15);
        assert_eq!(reflect(-3.0, 0.0, None), 3.0);
        assert!((0.0..=1.0).contains(&reflect(7.3, 0.0, Some(1.0))));
    }

    #[test]
    fn empty_data_is_rejected() {
        let m = KineticModel::default();
        let err = fit_nonlinear_posterior(&[], &m, &KineticPrior::default(), &McmcSettings::default(), 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }
}
