//! Exact value function for model-parameter Shapley values of a linear
//! Gaussian ensemble.
//!
//! Noise is integrated analytically, and the outer and inner parameter draws
//! are replaced by full enumeration of the ensemble:
//!
//! ```text
//! expectation: g(U) = 1/Q sum_j E[Y | w_j with U at the pinned value]
//! variance:    g(U) = 1/Q sum_j [ 1/Q sum_i Var(Y | w_ij) + Var_i E[Y | w_ij] ]
//! ```
//!
//! where `w_ij` takes `U` from member `i` and the rest from member `j`.
//! Variances over members are population variances.

use super::moments::{output_means, output_variances, PathwayVariant};
use super::pathway::LinearReward;
use super::policy::check_policy;
use crate::error::{Error, Result};
use crate::model::{output_labels, LinearGaussianModel, LinearPolicy, Parameterized, PkgModel, PosteriorEnsemble};
use crate::numeric::KahanSum;
use crate::shapley::{ValueFunction, ValueMode};

pub struct ModelParameterExact<'a> {
    pub ensemble: &'a PosteriorEnsemble<LinearGaussianModel>,
    pub policy: &'a LinearPolicy,
    pub reward: &'a LinearReward,
    pub mode: ValueMode,
    pub groups: Vec<Vec<usize>>,
    pub labels: Vec<String>,
    pub pinned: Vec<f64>,
    params: Vec<Vec<f64>>,
}

impl<'a> ModelParameterExact<'a> {
    pub fn new(
        ensemble: &'a PosteriorEnsemble<LinearGaussianModel>,
        policy: &'a LinearPolicy,
        reward: &'a LinearReward,
        mode: ValueMode,
    ) -> Result<Self> {
        let first = ensemble.members.first().ok_or(Error::EmptyEnsemble)?;
        check_policy(std::slice::from_ref(first), policy)?;
        reward.check(first)?;
        let params: Vec<Vec<f64>> = ensemble.members.iter().map(Parameterized::parameters).collect();
        let p = params[0].len();
        Ok(Self {
            ensemble,
            policy,
            reward,
            mode,
            groups: (0..p).map(|i| vec![i]).collect(),
            labels: first.parameter_labels(),
            pinned: ensemble.parameter_mean(),
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

    fn model_for(&self, base: &[f64], alt: &[f64], members: &[bool]) -> Result<LinearGaussianModel> {
        let mut w = base.to_vec();
        for (g, idx) in self.groups.iter().enumerate() {
            if members[g] {
                for &i in idx {
                    w[i] = alt[i];
                }
            }
        }
        self.ensemble.members[0].with_parameters(&w)
    }
}

impl ValueFunction for ModelParameterExact<'_> {
    fn num_inputs(&self) -> usize {
        self.groups.len()
    }

    fn num_outputs(&self) -> usize {
        let m = &self.ensemble.members[0];
        m.horizon() * m.n() + 1
    }

    fn input_labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    fn output_labels(&self) -> Vec<String> {
        output_labels(&self.ensemble.members[0])
    }

    fn evaluate(&self, _sample: usize, _walk: usize, members: &[bool], out: &mut [f64]) -> Result<()> {
        let k = self.num_outputs();
        let q = self.params.len();
        let mut acc = vec![KahanSum::new(); k];
        let mut mean = vec![0.0; k];
        let mut var = vec![0.0; k];
        for base in &self.params {
            match self.mode {
                ValueMode::Expectation => {
                    let model = self.model_for(base, &self.pinned, members)?;
                    output_means(&model, self.policy, self.reward, PathwayVariant::Reuse, &mut mean);
                    acc.iter_mut().zip(&mean).for_each(|(a, v)| a.add(*v));
                }
                ValueMode::Variance => {
                    let mut means = Vec::with_capacity(q);
                    let mut inner = vec![0.0; k];
                    for alt in &self.params {
                        let model = self.model_for(base, alt, members)?;
                        output_means(&model, self.policy, self.reward, PathwayVariant::Reuse, &mut mean);
                        output_variances(&model, self.policy, self.reward, PathwayVariant::Reuse, &mut var);
                        inner.iter_mut().zip(&var).for_each(|(a, v)| *a += v / q as f64);
                        means.push(mean.clone());
                    }
                    for (o, a) in acc.iter_mut().enumerate() {
                        let col: Vec<f64> = means.iter().map(|m| m[o]).collect();
                        a.add(inner[o] + crate::numeric::population_variance(&col));
                    }
                }
            }
        }
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = a.value() / q as f64;
        }
        Ok(())
    }
}
