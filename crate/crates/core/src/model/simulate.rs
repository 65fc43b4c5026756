//! Trajectory simulation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::noise::NoiseSpec;
use super::policy::LinearPolicy;
use super::reward::RewardSpec;
use super::PkgModel;
use crate::error::{Error, Result};
use crate::rng;

/// Source of the residuals `e_1, .., e_H`, flattened period-major.
#[derive(Debug, Clone, Copy)]
pub enum Innovations<'a> {
    /// Residuals given directly.
    Residuals(&'a [f64]),
    /// Standard-normal draws, scaled by the model's noise specification.
    Standard(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `s_1, .., s_T`.
    pub states: Vec<Vec<f64>>,
    /// `a_1, .., a_{T-1}` (feedback actions only).
    pub actions: Vec<Vec<f64>>,
    /// `r_1, .., r_T`.
    pub rewards: Vec<f64>,
    /// Auxiliary channels per period (empty for models without any).
    pub aux: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn periods(&self) -> usize {
        self.states.len()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// States flattened period-major, followed by the cumulative reward.
    pub fn outputs(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.states.iter().flatten().copied().collect();
        out.push(self.total_reward());
        out
    }
}

/// Labels matching [`Trajectory::outputs`].
pub fn output_labels<M: PkgModel + ?Sized>(model: &M) -> Vec<String> {
    let labels = model.state_labels();
    let mut out = Vec::with_capacity(model.horizon() * labels.len() + 1);
    for t in 1..=model.horizon() {
        for l in &labels {
            out.push(format!("s[t={t},k={l}]"));
        }
    }
    out.push("J".to_string());
    out
}

pub fn standard_normals<R: Rng>(r: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.sample(StandardNormal)).collect()
}

/// Simulate the full horizon.
pub fn simulate_trajectory<M: PkgModel + ?Sized>(
    model: &M,
    policy: &LinearPolicy,
    reward: &RewardSpec,
    innovations: Innovations<'_>,
) -> Result<Trajectory> {
    simulate_periods(model, policy, reward, innovations, model.horizon())
}

/// Simulate periods `1..=periods`; states and rewards agree with the full run.
pub fn simulate_periods<M: PkgModel + ?Sized>(
    model: &M,
    policy: &LinearPolicy,
    reward: &RewardSpec,
    innovations: Innovations<'_>,
    periods: usize,
) -> Result<Trajectory> {
    let (n, m, h) = (model.state_dim(), model.action_dim(), model.horizon());
    if periods == 0 || periods > h {
        return Err(Error::invalid(format!("periods must be in 1..={h}, got {periods}")));
    }
    if policy.horizon() != h || policy.n() != n || policy.m() != m {
        return Err(Error::dims("policy does not match the model"));
    }
    let len = match innovations {
        Innovations::Residuals(e) | Innovations::Standard(e) => e.len(),
    };
    if len < periods * n {
        return Err(Error::dims(format!("need {} innovations, got {len}", periods * n)));
    }
    let correlated;
    let (residuals, scaled): (&[f64], Option<(&super::noise::NoiseKind, &[f64], f64)>) = match (innovations, model.noise()) {
        (Innovations::Residuals(e), _) => (e, None),
        (Innovations::Standard(z), NoiseSpec::Correlated(noise)) => {
            if z.len() < n * h {
                return Err(Error::dims("correlated residuals need a full-horizon draw"));
            }
            correlated = noise.residuals(z);
            (&correlated, None)
        }
        (Innovations::Standard(z), NoiseSpec::Independent { kind, scale, dt }) => (z, Some((kind, scale.as_slice(), *dt))),
    };
    let residual_at = |t: usize, prev: &[f64], buf: &mut [f64]| {
        let block = &residuals[(t - 1) * n..t * n];
        match scaled {
            None => buf.copy_from_slice(block),
            Some((kind, scale, dt)) => {
                for k in 0..n {
                    buf[k] = NoiseSpec::independent_sd(*kind, scale, dt, k, prev[k]) * block[k];
                }
            }
        }
    };

    let mut states = Vec::with_capacity(periods);
    let mut actions = Vec::with_capacity(periods.saturating_sub(1));
    let mut rewards = Vec::with_capacity(periods);
    let mut aux_hist = Vec::with_capacity(periods);
    let mut aux = model.initial_aux();
    let mut e = vec![0.0; n];
    let mut s = vec![0.0; n];
    residual_at(1, model.initial_state(), &mut e);
    model.initial(&e, &mut s)?;
    states.push(s.clone());
    aux_hist.push(aux.clone());
    let mut a = vec![0.0; m];
    for t in 1..periods {
        policy.action(t, &s, &mut a);
        rewards.push(reward.reward(t, h, &s, &a));
        residual_at(t + 1, &s, &mut e);
        let mut next = vec![0.0; n];
        model.transition(t, &s, &mut aux, &a, &e, &mut next)?;
        actions.push(a.clone());
        s = next;
        states.push(s.clone());
        aux_hist.push(aux.clone());
    }
    policy.action(periods, &s, &mut a);
    rewards.push(reward.reward(periods, h, &s, &a));
    Ok(Trajectory { states, actions, rewards, aux: aux_hist })
}

/// `count` independent trajectories; trajectory `b` uses the stream keyed by `(seed, b)`.
pub fn simulate_batch<M: PkgModel + ?Sized>(
    model: &M,
    policy: &LinearPolicy,
    reward: &RewardSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    use rayon::prelude::*;
    let len = model.horizon() * model.state_dim();
    (0..count)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[rng::domain::BATCH, b as u64]);
            let z = standard_normals(&mut r, len);
            simulate_trajectory(model, policy, reward, Innovations::Standard(&z))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linear::{LinearGaussianModel, LinearGaussianSpec, ResidualSpec};
    use nalgebra::DMatrix;

    fn scalar_model(h: usize, beta: f64) -> LinearGaussianModel {
        LinearGaussianModel::from_spec(LinearGaussianSpec {
            n: 1,
            m: 1,
            horizon: h,
            state_labels: None,
            action_labels: None,
            s0: vec![0.0],
            mu_s: vec![vec![0.0]; h],
            mu_a: vec![vec![0.0]; h],
            beta_s: vec![vec![vec![beta]]; h - 1],
            beta_a: vec![vec![vec![1.0]]; h - 1],
            residual: ResidualSpec::Diagonal { sd: vec![vec![1.0]; h] },
        })
        .unwrap()
    }

    #[test]
    fn impulse_propagates_geometrically() {
        let model = scalar_model(3, 0.5);
        let policy = LinearPolicy::for_linear_model(&model, vec![DMatrix::zeros(1, 1); 2]).unwrap();
        let reward = RewardSpec::Linear { m: vec![0.0; 3], b: vec![vec![0.0]; 3], c: vec![vec![1.0]; 3] };
        let tr = simulate_trajectory(&model, &policy, &reward, Innovations::Residuals(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(tr.states, vec![vec![1.0], vec![0.5], vec![0.25]]);
        assert_eq!(tr.total_reward(), 1.75);
        assert_eq!(tr.actions.len(), 2);
    }

    #[test]
    fn truncated_run_agrees_with_full_run() {
        let model = scalar_model(5, 0.8);
        let policy = LinearPolicy::for_linear_model(&model, vec![DMatrix::from_element(1, 1, 0.3); 4]).unwrap();
        let reward = RewardSpec::Linear { m: vec![1.0; 5], b: vec![vec![0.5]; 5], c: vec![vec![1.0]; 5] };
        let z = [0.3, -1.0, 0.2, 0.7, -0.4];
        let full = simulate_trajectory(&model, &policy, &reward, Innovations::Standard(&z)).unwrap();
        for p in 1..=5 {
            let part = simulate_periods(&model, &policy, &reward, Innovations::Standard(&z[..]), p).unwrap();
            assert_eq!(part.states[..], full.states[..p]);
            if p < 5 {
                assert_eq!(part.rewards[..p - 1], full.rewards[..p - 1]);
            }
        }
    }

    #[test]
    fn output_layout() {
        let model = scalar_model(2, 0.5);
        let labels = output_labels(&model);
        assert_eq!(labels, vec!["s[t=1,k=s1]", "s[t=2,k=s1]", "J"]);
    }
}
