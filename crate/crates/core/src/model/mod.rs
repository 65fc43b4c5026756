//! Process knowledge graph models.
//!
//! A pKG model is a finite-horizon controlled Markov chain
//! `s_{t+1} = f_t(s_t, a_t; w) + e_{t+1}` with `s_1 = s_0 + e_1`, a feedback
//! policy `a_t = pi_t(s_t; theta)` and rewards `r_t(s_t, a_t)`. Two concrete
//! models are provided: [`KineticModel`] (fed-batch fermentation) and
//! [`LinearGaussianModel`].

pub mod data;
pub mod kinetics;
pub mod linear;
pub mod noise;
pub mod policy;
pub mod posterior;
pub mod reward;
pub mod simulate;

pub use data::{read_trajectories_csv, write_trajectories_csv, TrajectoryRecord};
pub use kinetics::{KineticConstants, KineticModel, KineticNoise, KineticSpec, Rates, UncertainParams};
pub use linear::{LinearGaussianModel, LinearGaussianSpec, ResidualSpec};
pub use noise::{CorrelatedNoise, NoiseKind, NoiseSpec};
pub use policy::{LinearPolicy, LinearPolicySpec};
pub use posterior::{
    fit_linear_posterior, fit_nonlinear_posterior, ConjugatePrior, EnsembleFile, KineticPrior, McmcSettings,
    NoisePrior, PosteriorEnsemble, RegressionPosterior,
};
pub use reward::RewardSpec;
pub use simulate::{output_labels, simulate_batch, simulate_periods, simulate_trajectory, Innovations, Trajectory};

use crate::error::Result;

/// A state-transition model over a fixed horizon.
pub trait PkgModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn initial_state(&self) -> &[f64];
    fn state_labels(&self) -> Vec<String>;
    fn action_labels(&self) -> Vec<String>;
    fn noise(&self) -> &NoiseSpec;

    fn initial_aux(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `s_1` from the residual `e_1`.
    fn initial(&self, residual: &[f64], out: &mut [f64]) -> Result<()>;

    /// `s_{t+1}` from `s_t`, `a_t` and the residual `e_{t+1}`, for 1-based `t < H`.
    fn transition(
        &self,
        t: usize,
        state: &[f64],
        aux: &mut [f64],
        action: &[f64],
        residual: &[f64],
        out: &mut [f64],
    ) -> Result<()>;
}

/// Models whose uncertain parameters can be read and replaced as a flat vector.
pub trait Parameterized: Sized {
    fn parameter_labels(&self) -> Vec<String>;
    fn parameters(&self) -> Vec<f64>;
    fn with_parameters(&self, w: &[f64]) -> Result<Self>;
}
