//! Permutation sampling.
//!
//! Shapley estimates average marginal contributions over permutations of the
//! inputs. Permutations here come from points on a sphere: a point on
//! `S^{s-2}` is lifted to the hyperplane orthogonal to `(1, .., 1)` in `R^s`
//! and its coordinates are ranked. Uniform, low-discrepancy or antithetic
//! sphere points then give permutation batches with matching properties.

pub mod diagnostics;
pub mod permutation;
pub mod sobol;
pub mod sphere;

pub use diagnostics::{ks_critical_value, ks_first_coordinate, ks_statistic, KsOutcome};
pub use permutation::{
    cube_points, discrepancy_score, read_permutations_csv, reverse, sample_permutations, sphere_to_permutation,
    write_permutations_csv, CubeSource, PermutationBatch, PermutationFile, PermutationMethod, PermutationSampler,
};
pub use sobol::{sobol_points, DigitalShift, SobolSequence};
pub use sphere::{bmt, sct, sine_power_integral, tfww, SphereMethod};
