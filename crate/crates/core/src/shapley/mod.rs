//! Shapley-value estimation.

pub mod estimator;
pub mod planning;
pub mod report;
pub mod value;

pub use estimator::{exact_shapley, shapley_estimate, ValueFunction};
pub use planning::{plan_sample_size, required_sample_size_range, required_sample_size_variance};
pub use report::SvReport;
pub use value::{McSizes, ModelParameterValue, OutputPlan, PolicyValue, RandomFactorValue, ValueMode};
