//! The inequality itself: pointwise quantities, the discretized functional,
//! the constant estimator and the numerical verifier.

mod estimate;
mod functional;
mod pointwise;
mod verify;

pub use estimate::{
    constant_curve, curve_csv, estimate_constant, estimate_constant_for, min_pairwise_distance,
    ConstantEstimate, FieldSpace, OptimizerConfig, SeparationSpec, StartTrace, DIVERGENCE_RATIO,
    RHS_REGULARIZATION,
};
pub use functional::{
    blowup_csv, blowup_sequence, evaluate_inequality, truncate, BlowupStep, InequalityProblem,
    InequalityReport, ZERO_RESIDUAL,
};
pub use pointwise::{entropy, point_eval, EntropyValue, PointEvaluation, TIE_TOL};
pub use verify::{
    slab_violations, verify_limit_lemmas, GstabBin, Sigma1Row, SlabCheck, VerifyConfig,
    VerifyReport, SLAB_SLACK,
};
