//! Exact and accelerated Shapley values for linear Gaussian models.
//!
//! Closed forms for residual inputs, recursive pathway products, the
//! covariance recursion, exact policy and model-parameter value functions,
//! and brute-force counterparts of each.

pub mod covariance;
pub mod instance;
pub mod model_params;
pub mod moments;
pub mod pathway;
pub mod policy;
pub mod random_factors;
pub mod suite;

pub use covariance::{reward_variance, state_covariance, state_covariance_direct, CovTable};
pub use instance::{random_instance, CovarianceKind, LinearInstance};
pub use model_params::ModelParameterExact;
pub use moments::{output_means, output_variances, PathwayVariant};
pub use pathway::{pathway_direct, pathway_from_coefficients, pathway_from_start, period_map, period_maps, reward_loadings, LinearReward};
pub use policy::PolicyExactValue;
pub use random_factors::{random_factor_sv_predictive, random_factor_sv_variance, residual_loadings, RandomFactorExact};
pub use suite::{
    all_permutations, brute_force_suite, exhaustive_shapley, report_checksum, speedups, write_bench_csv, BenchRow,
    BenchSettings, BenchTask, MAX_EXHAUSTIVE_INPUTS,
};
