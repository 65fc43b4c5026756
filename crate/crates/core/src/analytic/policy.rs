//! Exact value functions for policy-gain Shapley values.
//!
//! Gains outside the coalition are zeroed; anchors are kept. The expectation value is `E[Y]`
//! through `R_{1,t}`; the variance value is `Var(Y)` through the state
//! covariance table. Both are deterministic, so every walk of a permutation
//! estimator sees the same set function.

use nalgebra::DMatrix;

use super::moments::{
    deviations_from_paths, means_from_deviations, offset_drift, output_means, output_variances, policy_offsets,
    PathwayVariant,
};
use super::pathway::{check_gains, pathway_from_start, period_map, LinearReward};
use crate::error::{Error, Result};
use crate::model::{output_labels, LinearGaussianModel, LinearPolicy, PkgModel};
use crate::shapley::{ValueFunction, ValueMode};

pub struct PolicyExactValue<'a> {
    pub models: &'a [LinearGaussianModel],
    pub policy: &'a LinearPolicy,
    pub reward: &'a LinearReward,
    pub mode: ValueMode,
    pub variant: PathwayVariant,
}

impl<'a> PolicyExactValue<'a> {
    pub fn new(
        models: &'a [LinearGaussianModel],
        policy: &'a LinearPolicy,
        reward: &'a LinearReward,
        mode: ValueMode,
        variant: PathwayVariant,
    ) -> Result<Self> {
        let first = models.first().ok_or(Error::EmptyEnsemble)?;
        check_policy(models, policy)?;
        reward.check(first)?;
        Ok(Self { models, policy, reward, mode, variant })
    }

}

pub(crate) fn check_policy(models: &[LinearGaussianModel], policy: &LinearPolicy) -> Result<()> {
    if policy.bounds().is_some() {
        return Err(Error::invalid("the analytic engine needs an unbounded policy"));
    }
    for m in models {
        check_gains(m, policy.thetas())?;
        if policy.horizon() != m.horizon() || policy.n() != m.n() || policy.m() != m.m() {
            return Err(Error::dims("policy does not match the model"));
        }
    }
    Ok(())
}

impl ValueFunction for PolicyExactValue<'_> {
    fn num_inputs(&self) -> usize {
        self.policy.num_parameters()
    }

    fn num_outputs(&self) -> usize {
        self.models[0].horizon() * self.models[0].n() + 1
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

    fn evaluate(&self, sample: usize, _walk: usize, members: &[bool], out: &mut [f64]) -> Result<()> {
        let model = &self.models[sample];
        let policy = self.policy.masked(members);
        match self.mode {
            ValueMode::Expectation => output_means(model, &policy, self.reward, self.variant, out),
            ValueMode::Variance => output_variances(model, &policy, self.reward, self.variant, out),
        }
        Ok(())
    }

    fn evaluate_walk(&self, sample: usize, walk: usize, order: &[usize], out: &mut [Vec<f64>]) -> Result<()> {
        if self.variant != PathwayVariant::Incremental || self.mode != ValueMode::Expectation {
            let mut members = vec![false; self.num_inputs()];
            self.evaluate(sample, walk, &members, &mut out[0])?;
            for (step, &o) in order.iter().enumerate() {
                members[o] = true;
                self.evaluate(sample, walk, &members, &mut out[step + 1])?;
            }
            return Ok(());
        }
        let model = &self.models[sample];
        let mut members = vec![false; self.num_inputs()];
        let mut policy = self.policy.masked(&members);
        let mut cache = PrefixCache::new(model, &policy);
        cache.write(model, &policy, self.reward, &mut out[0]);
        for (step, &o) in order.iter().enumerate() {
            members[o] = true;
            let (t, _, _) = self.policy.parameter_index(o);
            policy = self.policy.masked(&members);
            cache.update(model, &policy, t);
            cache.write(model, &policy, self.reward, &mut out[step + 1]);
        }
        Ok(())
    }
}

/// `C_t` and `R_{1,t}` for a walk prefix; adding a gain at period `t` only
/// invalidates `C_t` and `R_{1,t'}` for `t' >= t`.
struct PrefixCache {
    maps: Vec<DMatrix<f64>>,
    paths: Vec<DMatrix<f64>>,
}

impl PrefixCache {
    fn new(model: &LinearGaussianModel, policy: &LinearPolicy) -> Self {
        let maps: Vec<_> = (1..model.horizon()).map(|t| period_map(model, policy.thetas(), t)).collect();
        let paths = pathway_from_start(&maps, model.n());
        Self { maps, paths }
    }

    fn update(&mut self, model: &LinearGaussianModel, policy: &LinearPolicy, t: usize) {
        self.maps[t - 1] = period_map(model, policy.thetas(), t);
        for s in t..self.paths.len() {
            self.paths[s] = &self.maps[s - 1] * &self.paths[s - 1];
        }
    }

    fn write(&self, model: &LinearGaussianModel, policy: &LinearPolicy, reward: &LinearReward, out: &mut [f64]) {
        let offsets = policy_offsets(model, policy);
        let drift = offset_drift(model, offsets.as_deref());
        let dev = deviations_from_paths(model, &self.maps, &self.paths, drift.as_deref());
        means_from_deviations(model, policy, reward, offsets.as_deref(), &dev, out);
    }
}
