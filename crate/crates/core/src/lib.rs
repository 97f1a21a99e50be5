//! Information geometry of pairwise isotropic Gaussian-Markov random fields.
//!
//! The crate simulates inverse-temperature cycles of a GMRF on a toroidal 2D
//! lattice with Metropolis-Hastings / Gibbs dynamics, estimates the 9x9 patch
//! covariance, evaluates the first and second fundamental forms of the
//! (mu, sigma^2, beta) parametric space in closed form, and tracks Gaussian,
//! mean and principal curvatures plus entropy along the cycle. Sign changes of
//! the Gaussian curvature flag phase transitions; the heating and cooling
//! branches trace a hysteresis loop in the (curvature, entropy) plane.

pub mod cycle;
pub mod error;
pub mod geometry;
pub mod lattice;
pub mod oracle;
pub mod parallel;
pub mod patch;
pub mod report;
pub mod sampler;

pub use cycle::{
    detect_sign_changes, hysteresis_path, run_cycle, CycleConfig, CycleRecord, EstimateSchedule,
    HysteresisPath, HysteresisQuantity, Phase, SignChangeEvent, SignDirection,
};
pub use error::{ConfigError, CycleError, GeometryError, ModelError, OracleError, SnapshotError};
pub use geometry::{
    curvatures, curvatures_from_forms, default_ridge, entropy, first_form_nested,
    first_form_tensorial, fundamental_forms, second_form, second_form_nested,
    second_form_tensorial, shape_operator, CurvatureReport, FormComponents, FundamentalForms,
};
pub use lattice::{init_lattice, Lattice, ModelParams, NeighborhoodSpec};
pub use oracle::{
    finite_difference_score_residual, materialized_kron_sum, mc_fisher_entry, FisherOrder,
    FormEntry, SyntheticPatchModel,
};
pub use patch::{kron_plus_norm, patch_covariance, patch_vectorize, plus_norm, PatchCovariance};
pub use sampler::{
    estimate_params, local_conditional_logdensity, metropolis_sweep, natural_decomposition,
    pseudo_log_likelihood, NaturalDecomposition, SamplerConfig, SamplerMode, SweepOrder,
    SweepStats,
};
