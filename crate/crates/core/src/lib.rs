//! Shapley-value sensitivity analysis for process knowledge graph (pKG) models.
//!
//! The crate is organised around five pieces:
//!
//! * [`model`]: pKG state-transition models (fed-batch kinetics and linear
//!   Gaussian), feedback policies, rewards, trajectory simulation and
//!   posterior fitting.
//! * [`sampling`]: permutation generators built on uniform sphere samplers and
//!   randomized Sobol points, plus uniformity diagnostics.
//! * [`shapley`]: the permutation Shapley estimator with common random
//!   numbers, simulation-based value functions and sample-size planning.
//! * [`analytic`]: closed-form and recursive Shapley values for linear
//!   Gaussian pKG models.
//! * [`cli`]: the `pkgsv` command-line front end.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod sampling;
pub mod shapley;

pub use error::{Error, Result};
