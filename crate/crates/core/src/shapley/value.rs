//! Simulation-based value functions.
//!
//! Three input families are supported: residuals `e_t^k` (random factors),
//! policy gains `theta_t^{ij}` and model parameters `w`. Every value function
//! returns, for each output (all states `s_t^k` and the cumulative reward
//! `J`), either a Monte Carlo expectation or an expected conditional variance.
//! Noise streams are keyed by `(seed, sample, walk, draw)`, so all prefixes of
//! one walk share random numbers.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::estimator::ValueFunction;
use crate::error::{Error, Result};
use crate::model::simulate::{output_labels, simulate_periods, simulate_trajectory, standard_normals};
use crate::model::{Innovations, LinearPolicy, NoiseSpec, Parameterized, PkgModel, PosteriorEnsemble, RewardSpec};
use crate::numeric::{sample_variance, KahanSum};
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueMode {
    /// `g(U) = E[Y | U]`.
    Expectation,
    /// `g(U) = E[Var(Y | O \ U)]`.
    Variance,
}

/// Monte Carlo sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct McSizes {
    /// Trajectories per evaluation in expectation mode (and per policy variance).
    pub trajectories: usize,
    /// Outer draws of the conditioning inputs in variance mode.
    pub outer: usize,
    /// Inner draws of the free inputs in variance mode.
    pub inner: usize,
}

impl Default for McSizes {
    fn default() -> Self {
        Self { trajectories: 64, outer: 64, inner: 64 }
    }
}

/// Whether one rollout serves every output or each output is simulated separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputPlan {
    Reuse,
    PerOutput,
}

/// Outputs from one set of innovations, honouring the output plan.
fn rollout<M: PkgModel + ?Sized>(
    model: &M,
    policy: &LinearPolicy,
    reward: &RewardSpec,
    innovations: Innovations<'_>,
    plan: OutputPlan,
    out: &mut [f64],
) -> Result<()> {
    match plan {
        OutputPlan::Reuse => {
            let tr = simulate_trajectory(model, policy, reward, innovations)?;
            let mut i = 0;
            for s in &tr.states {
                for v in s {
                    out[i] = *v;
                    i += 1;
                }
            }
            out[i] = tr.total_reward();
        }
        OutputPlan::PerOutput => {
            let n = model.state_dim();
            let h = model.horizon();
            for t in 1..=h {
                for k in 0..n {
                    let tr = simulate_periods(model, policy, reward, innovations, t)?;
                    out[(t - 1) * n + k] = tr.states[t - 1][k];
                }
            }
            out[h * n] = simulate_trajectory(model, policy, reward, innovations)?.total_reward();
        }
    }
    Ok(())
}

fn mean_into(acc: &[KahanSum], count: usize, out: &mut [f64]) {
    for (o, a) in out.iter_mut().zip(acc) {
        *o = a.value() / count as f64;
    }
}

/// Per-output sample variance over rows, averaged into `acc`.
fn add_variances(rows: &[Vec<f64>], acc: &mut [KahanSum]) {
    let mut col = vec![0.0; rows.len()];
    for (j, a) in acc.iter_mut().enumerate() {
        for (c, r) in col.iter_mut().zip(rows) {
            *c = r[j];
        }
        a.add(sample_variance(&col));
    }
}

/// Residuals `e_t^k` as inputs.
///
/// Expectation mode pins residuals in `U` at `mean + lambda sd`; the others
/// are drawn from their (marginal) law. Variance mode draws the residuals in
/// `O \ U` once per outer draw and redraws those in `U` for each inner draw.
pub struct RandomFactorValue<'a, M: PkgModel> {
    pub models: &'a [M],
    pub policy: &'a LinearPolicy,
    pub reward: &'a RewardSpec,
    pub mode: ValueMode,
    pub lambda: f64,
    pub sizes: McSizes,
    pub plan: OutputPlan,
    pub seed: u64,
}

impl<'a, M: PkgModel> RandomFactorValue<'a, M> {
    pub fn new(models: &'a [M], policy: &'a LinearPolicy, reward: &'a RewardSpec, mode: ValueMode, seed: u64) -> Result<Self> {
        let first = models.first().ok_or(Error::EmptyEnsemble)?;
        reward.validate(first.horizon(), first.state_dim(), first.action_dim())?;
        Ok(Self { models, policy, reward, mode, lambda: 1.0, sizes: McSizes::default(), plan: OutputPlan::Reuse, seed })
    }

    fn dim(&self) -> usize {
        self.models[0].horizon() * self.models[0].state_dim()
    }

    /// Innovations for one draw: `pick(l)` says which source feeds input `l`.
    fn compose(&self, model: &M, sources: [&[f64]; 2], pick: impl Fn(usize) -> Pick) -> Composed {
        match model.noise() {
            NoiseSpec::Correlated(noise) => {
                let e0 = noise.residuals(sources[0]);
                let e1 = if matches!(self.mode, ValueMode::Variance) { noise.residuals(sources[1]) } else { Vec::new() };
                let sd = noise.sd();
                let e = (0..e0.len())
                    .map(|l| match pick(l) {
                        Pick::Base => e0[l],
                        Pick::Alt => e1[l],
                        Pick::Pinned => self.lambda * sd[l],
                    })
                    .collect();
                Composed::Residuals(e)
            }
            NoiseSpec::Independent { .. } => {
                let z = (0..sources[0].len())
                    .map(|l| match pick(l) {
                        Pick::Base => sources[0][l],
                        Pick::Alt => sources[1][l],
                        Pick::Pinned => self.lambda,
                    })
                    .collect();
                Composed::Standard(z)
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Pick {
    Base,
    Alt,
    Pinned,
}

enum Composed {
    Residuals(Vec<f64>),
    Standard(Vec<f64>),
}

impl Composed {
    fn as_innovations(&self) -> Innovations<'_> {
        match self {
            Composed::Residuals(e) => Innovations::Residuals(e),
            Composed::Standard(z) => Innovations::Standard(z),
        }
    }
}

impl<M: PkgModel> ValueFunction for RandomFactorValue<'_, M> {
    fn num_inputs(&self) -> usize {
        self.dim()
    }

    fn num_outputs(&self) -> usize {
        self.dim() + 1
    }

    fn input_labels(&self) -> Vec<String> {
        let labels = self.models[0].state_labels();
        (1..=self.models[0].horizon())
            .flat_map(|t| labels.iter().map(move |l| format!("e[t={t},k={l}]")))
            .collect()
    }

    fn output_labels(&self) -> Vec<String> {
        output_labels(&self.models[0])
    }

    fn num_samples(&self) -> usize {
        self.models.len()
    }

    fn evaluate(&self, sample: usize, walk: usize, members: &[bool], out: &mut [f64]) -> Result<()> {
        let model = &self.models[sample];
        let dim = self.dim();
        let k = dim + 1;
        let (q, d) = (sample as u64, walk as u64);
        let mut row = vec![0.0; k];
        match self.mode {
            ValueMode::Expectation => {
                let mut acc = vec![KahanSum::new(); k];
                for l in 0..self.sizes.trajectories {
                    let z = standard_normals(&mut rng::stream(self.seed, &[domain::NOISE, q, d, l as u64]), dim);
                    let c = self.compose(model, [&z, &[]], |i| if members[i] { Pick::Pinned } else { Pick::Base });
                    rollout(model, self.policy, self.reward, c.as_innovations(), self.plan, &mut row)?;
                    acc.iter_mut().zip(&row).for_each(|(a, v)| a.add(*v));
                }
                mean_into(&acc, self.sizes.trajectories, out);
            }
            ValueMode::Variance => {
                let mut acc = vec![KahanSum::new(); k];
                let mut rows = vec![vec![0.0; k]; self.sizes.inner];
                for r in 0..self.sizes.outer {
                    let zo = standard_normals(&mut rng::stream(self.seed, &[domain::OUTER, q, d, r as u64]), dim);
                    for (j, row) in rows.iter_mut().enumerate() {
                        let zi = standard_normals(
                            &mut rng::stream(self.seed, &[domain::INNER, q, d, r as u64, j as u64]),
                            dim,
                        );
                        let c = self.compose(model, [&zo, &zi], |i| if members[i] { Pick::Alt } else { Pick::Base });
                        rollout(model, self.policy, self.reward, c.as_innovations(), self.plan, row)?;
                    }
                    add_variances(&rows, &mut acc);
                }
                mean_into(&acc, self.sizes.outer, out);
            }
        }
        Ok(())
    }
}

/// Policy gains as inputs; gains outside `U` are set to zero.
pub struct PolicyValue<'a, M: PkgModel> {
    pub models: &'a [M],
    pub policy: &'a LinearPolicy,
    pub reward: &'a RewardSpec,
    pub mode: ValueMode,
    pub trajectories: usize,
    pub plan: OutputPlan,
    pub seed: u64,
}

impl<'a, M: PkgModel> PolicyValue<'a, M> {
    pub fn new(models: &'a [M], policy: &'a LinearPolicy, reward: &'a RewardSpec, mode: ValueMode, seed: u64) -> Result<Self> {
        let first = models.first().ok_or(Error::EmptyEnsemble)?;
        reward.validate(first.horizon(), first.state_dim(), first.action_dim())?;
        Ok(Self { models, policy, reward, mode, trajectories: 64, plan: OutputPlan::Reuse, seed })
    }
}

impl<M: PkgModel> ValueFunction for PolicyValue<'_, M> {
    fn num_inputs(&self) -> usize {
        self.policy.num_parameters()
    }

    fn num_outputs(&self) -> usize {
        self.models[0].horizon() * self.models[0].state_dim() + 1
    }

    fn input_labels(&self) -> Vec<String> {
        self.policy.parameter_labels(&self.models[0].state_labels(), &self.models[0].action_labels())
    }

    fn output_labels(&self) -> Vec<String> {
        output_labels(&self.models[0])
    }

    fn num_samples(&self) -> usize {
        self.models.len()
    }

    fn evaluate(&self, sample: usize, walk: usize, members: &[bool], out: &mut [f64]) -> Result<()> {
        let model = &self.models[sample];
        let policy = self.policy.masked(members);
        let dim = model.horizon() * model.state_dim();
        let k = dim + 1;
        let mut rows = vec![vec![0.0; k]; self.trajectories];
        for (l, row) in rows.iter_mut().enumerate() {
            let z = standard_normals(
                &mut rng::stream(self.seed, &[domain::NOISE, sample as u64, walk as u64, l as u64]),
                dim,
            );
            rollout(model, &policy, self.reward, Innovations::Standard(&z), self.plan, row)?;
        }
        match self.mode {
            ValueMode::Expectation => {
                let mut acc = vec![KahanSum::new(); k];
                for row in &rows {
                    acc.iter_mut().zip(row).for_each(|(a, v)| a.add(*v));
                }
                mean_into(&acc, self.trajectories, out);
            }
            ValueMode::Variance => {
                let mut acc = vec![KahanSum::new(); k];
                add_variances(&rows, &mut acc);
                mean_into(&acc, 1, out);
            }
        }
        Ok(())
    }
}

/// Model parameters as inputs, grouped into named blocks of coordinates.
///
/// Coordinates of inputs in `U` are pinned (expectation mode) or redrawn from
/// another ensemble member (variance mode); all other coordinates come from
/// the member drawn for the outer loop.
pub struct ModelParameterValue<'a, M: PkgModel + Parameterized> {
    pub ensemble: &'a PosteriorEnsemble<M>,
    pub policy: &'a LinearPolicy,
    pub reward: &'a RewardSpec,
    pub mode: ValueMode,
    pub sizes: McSizes,
    pub groups: Vec<Vec<usize>>,
    pub labels: Vec<String>,
    pub pinned: Vec<f64>,
    pub with_replacement: bool,
    pub seed: u64,
    params: Vec<Vec<f64>>,
}

impl<'a, M: PkgModel + Parameterized> ModelParameterValue<'a, M> {
    /// One input per parameter coordinate, pinned at the ensemble mean.
    pub fn new(ensemble: &'a PosteriorEnsemble<M>, policy: &'a LinearPolicy, reward: &'a RewardSpec, mode: ValueMode, seed: u64) -> Result<Self> {
        let first = ensemble.members.first().ok_or(Error::EmptyEnsemble)?;
        reward.validate(first.horizon(), first.state_dim(), first.action_dim())?;
        let params: Vec<Vec<f64>> = ensemble.members.iter().map(Parameterized::parameters).collect();
        let p = params[0].len();
        Ok(Self {
            ensemble,
            policy,
            reward,
            mode,
            sizes: McSizes::default(),
            groups: (0..p).map(|i| vec![i]).collect(),
            labels: first.parameter_labels(),
            pinned: ensemble.parameter_mean(),
            with_replacement: true,
            seed,
            params,
        })
    }

    pub fn with_groups(mut self, groups: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Self> {
        let p = self.params[0].len();
        if groups.len() != labels.len() || groups.iter().flatten().any(|&i| i >= p) {
            return Err(Error::invalid("parameter groups must index existing coordinates and have one label each"));
        }
        self.groups = groups;
        self.labels = labels;
        Ok(self)
    }

    fn outer_members(&self, walk: usize) -> Result<Vec<usize>> {
        let q = self.params.len();
        let mut r = rng::stream(self.seed, &[domain::MEMBER, walk as u64]);
        if self.with_replacement {
            Ok((0..self.sizes.outer).map(|_| r.random_range(0..q)).collect())
        } else {
            if self.sizes.outer > q {
                return Err(Error::EnsembleTooSmall { requested: self.sizes.outer, available: q });
            }
            let mut idx: Vec<usize> = (0..q).collect();
            idx.shuffle(&mut r);
            idx.truncate(self.sizes.outer);
            Ok(idx)
        }
    }

    fn model_for(&self, base: &[f64], alt: Option<&[f64]>, members: &[bool]) -> Result<M> {
        let mut w = base.to_vec();
        for (g, idx) in self.groups.iter().enumerate() {
            if members[g] {
                for &i in idx {
                    w[i] = match alt {
                        Some(a) => a[i],
                        None => self.pinned[i],
                    };
                }
            }
        }
        self.ensemble.members[0].with_parameters(&w)
    }
}

impl<M: PkgModel + Parameterized> ValueFunction for ModelParameterValue<'_, M> {
    fn num_inputs(&self) -> usize {
        self.groups.len()
    }

    fn num_outputs(&self) -> usize {
        let m = &self.ensemble.members[0];
        m.horizon() * m.state_dim() + 1
    }

    fn input_labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn output_labels(&self) -> Vec<String> {
        output_labels(&self.ensemble.members[0])
    }

    fn evaluate(&self, _sample: usize, walk: usize, members: &[bool], out: &mut [f64]) -> Result<()> {
        let first = &self.ensemble.members[0];
        let dim = first.horizon() * first.state_dim();
        let k = dim + 1;
        let outer = self.outer_members(walk)?;
        let d = walk as u64;
        let mut acc = vec![KahanSum::new(); k];
        match self.mode {
            ValueMode::Expectation => {
                let mut row = vec![0.0; k];
                for (r, &j) in outer.iter().enumerate() {
                    let model = self.model_for(&self.params[j], None, members)?;
                    for l in 0..self.sizes.trajectories {
                        let z = standard_normals(&mut rng::stream(self.seed, &[domain::NOISE, d, r as u64, l as u64]), dim);
                        rollout(&model, self.policy, self.reward, Innovations::Standard(&z), OutputPlan::Reuse, &mut row)?;
                        acc.iter_mut().zip(&row).for_each(|(a, v)| a.add(*v));
                    }
                }
                mean_into(&acc, outer.len() * self.sizes.trajectories, out);
            }
            ValueMode::Variance => {
                let q = self.params.len();
                let mut rows = vec![vec![0.0; k]; self.sizes.inner];
                for (r, &j) in outer.iter().enumerate() {
                    let mut pick = rng::stream(self.seed, &[domain::INNER, d, r as u64]);
                    for (i, row) in rows.iter_mut().enumerate() {
                        let alt = pick.random_range(0..q);
                        let model = self.model_for(&self.params[j], Some(&self.params[alt]), members)?;
                        let z = standard_normals(&mut rng::stream(self.seed, &[domain::NOISE, d, r as u64, i as u64]), dim);
                        rollout(&model, self.policy, self.reward, Innovations::Standard(&z), OutputPlan::Reuse, row)?;
                    }
                    add_variances(&rows, &mut acc);
                }
                mean_into(&acc, outer.len(), out);
            }
        }
        Ok(())
    }
}
