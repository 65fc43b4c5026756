//! JSON run configuration.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    simulate_trajectory, ConjugatePrior, Innovations, KineticModel, KineticPrior, KineticSpec, LinearGaussianModel,
    LinearGaussianSpec, LinearPolicy, LinearPolicySpec, McmcSettings, PkgModel, RewardSpec,
};
use crate::sampling::{CubeSource, PermutationMethod};
use crate::shapley::{OutputPlan, ValueMode};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub policy: Option<PolicyConfig>,
    #[serde(default)]
    pub reward: Option<RewardSpec>,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub io: IoConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Kinetic(KineticSpec),
    LinearGaussian(LinearGaussianSpec),
}

/// A linear feedback policy.
///
/// `nominal` centres the policy on the model: the linear Gaussian means, or
/// the noise-free kinetic trajectory under the constant feed `feed`. `gains`
/// is an `n x m` matrix used in every period.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    Explicit(LinearPolicySpec),
    Nominal {
        #[serde(default)]
        feed: Option<Vec<f64>>,
        gains: Vec<Vec<f64>>,
        #[serde(default)]
        bounds: Option<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub batches: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { batches: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Ensemble size for the linear Gaussian posterior.
    pub samples: Option<usize>,
    pub prior: ConjugatePrior,
    pub kinetic_prior: KineticPrior,
    pub mcmc: McmcSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    RandomFactors,
    PolicyParameters,
    ModelParameters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Simulation,
    Analytic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub inputs: InputKind,
    pub mode: ValueMode,
    pub engine: Engine,
    pub lambda: f64,
    /// Trajectories per evaluation (`L`).
    pub trajectories: usize,
    pub outer: usize,
    pub inner: usize,
    /// Permutations per posterior sample (`D`).
    pub permutations: usize,
    pub method: PermutationMethod,
    pub cube: Option<CubeSource>,
    /// Posterior samples used (`Q`); defaults to the whole ensemble.
    pub samples: Option<usize>,
    pub plan: OutputPlan,
    pub with_replacement: bool,
    /// Output labels to report; all outputs when absent.
    pub outputs: Option<Vec<String>>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: InputKind::RandomFactors,
            mode: ValueMode::Expectation,
            engine: Engine::Simulation,
            lambda: 1.0,
            trajectories: 64,
            outer: 64,
            inner: 64,
            permutations: 100,
            method: PermutationMethod::Tfww,
            cube: None,
            samples: None,
            plan: OutputPlan::Reuse,
            with_replacement: true,
            outputs: None,
        }
    }
}

/// File locations, relative to the configuration file.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub data: Option<PathBuf>,
    pub posterior: Option<PathBuf>,
}

/// A model of either family.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Kinetic(KineticModel),
    Linear(LinearGaussianModel),
}

impl AnyModel {
    pub fn as_dyn(&self) -> &dyn PkgModel {
        match self {
            AnyModel::Kinetic(m) => m,
            AnyModel::Linear(m) => m,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, dir))
    }

    /// Parses and validates a configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.build_model()?;
        let m = model.as_dyn();
        self.build_policy(&model)?;
        self.build_reward(&model)?.validate(m.horizon(), m.state_dim(), m.action_dim())?;
        let a = &self.analysis;
        if !a.lambda.is_finite() {
            return Err(Error::invalid("analysis.lambda must be finite"));
        }
        if a.trajectories == 0 || a.outer == 0 || a.inner == 0 || a.permutations == 0 {
            return Err(Error::invalid("analysis sizes must be at least 1"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<AnyModel> {
        Ok(match &self.model {
            ModelConfig::Kinetic(spec) => AnyModel::Kinetic(KineticModel::new(spec.clone())?),
            ModelConfig::LinearGaussian(spec) => AnyModel::Linear(LinearGaussianModel::from_spec(spec.clone())?),
        })
    }

    pub fn build_reward(&self, model: &AnyModel) -> Result<RewardSpec> {
        match (&self.reward, model) {
            (Some(r), _) => Ok(r.clone()),
            (None, AnyModel::Kinetic(_)) => Ok(RewardSpec::fermentation()),
            (None, AnyModel::Linear(_)) => Err(Error::invalid("a linear Gaussian model needs a reward section")),
        }
    }

    pub fn build_policy(&self, model: &AnyModel) -> Result<LinearPolicy> {
        let m = model.as_dyn();
        let (n, a, h) = (m.state_dim(), m.action_dim(), m.horizon());
        let nominal = |gains: &[Vec<f64>]| -> Result<Vec<DMatrix<f64>>> {
            if gains.len() != n || gains.iter().any(|r| r.len() != a) {
                return Err(Error::dims(format!("policy gains must be {n} x {a}")));
            }
            let g = DMatrix::from_fn(n, a, |i, j| gains[i][j]);
            Ok(vec![g; h.saturating_sub(1)])
        };
        match (self.policy.as_ref(), model) {
            (Some(PolicyConfig::Explicit(spec)), _) => {
                let p = LinearPolicy::try_from(spec.clone())?;
                if (p.n(), p.m(), p.horizon()) != (n, a, h) {
                    return Err(Error::dims("policy does not match the model"));
                }
                Ok(p)
            }
            (Some(PolicyConfig::Nominal { feed, gains, bounds }), AnyModel::Linear(lm)) => {
                if feed.is_some() {
                    return Err(Error::invalid("policy.feed applies to kinetic models only"));
                }
                LinearPolicy::for_linear_model(lm, nominal(gains)?)?.with_bounds(bounds.clone())
            }
            (Some(PolicyConfig::Nominal { feed, gains, bounds }), AnyModel::Kinetic(km)) => {
                let feed = feed.clone().unwrap_or_else(|| vec![0.005]);
                if feed.len() != a {
                    return Err(Error::dims("policy.feed must have one entry per action"));
                }
                let bounds = bounds.clone().or_else(|| Some(vec![[0.0, f64::INFINITY]; a]));
                kinetic_nominal(km, &feed, nominal(gains)?, bounds)
            }
            (None, AnyModel::Linear(lm)) => {
                LinearPolicy::for_linear_model(lm, vec![DMatrix::zeros(n, a); h.saturating_sub(1)])
            }
            (None, AnyModel::Kinetic(km)) => {
                kinetic_nominal(km, &[0.005], vec![DMatrix::zeros(n, a); h.saturating_sub(1)], Some(vec![[0.0, f64::INFINITY]]))
            }
        }
    }
}

/// Policy centred on the noise-free trajectory under a constant feed.
fn kinetic_nominal(
    model: &KineticModel,
    feed: &[f64],
    theta: Vec<DMatrix<f64>>,
    bounds: Option<Vec<[f64; 2]>>,
) -> Result<LinearPolicy> {
    let h = model.horizon();
    let mu_a: Vec<DVector<f64>> = vec![DVector::from_column_slice(feed); h];
    let open = LinearPolicy::open_loop(vec![DVector::zeros(5); h], mu_a.clone())?;
    let zeros = vec![0.0; h * 5];
    let tr = simulate_trajectory(model, &open, &RewardSpec::fermentation(), Innovations::Standard(&zeros))?;
    let mu_s = tr.states.iter().map(|s| DVector::from_column_slice(s)).collect();
    LinearPolicy::new(mu_s, mu_a, theta, bounds)
}
