//! Numerical laboratory for a weighted Poincaré-type inequality for vector fields
//!
//! ```text
//! ∫_Ω Σ_i |f_i|^p  ≤  C ∫_Ω Σ_i u_i (|f_i|^p + |∇f_i|^p),      f = m − A u,
//! ```
//!
//! for nonnegative vector fields `u` kept away from the degenerate states
//! `u_I` (where `u_i = 0` for `i ∈ I` and `f_j = 0` otherwise).
//!
//! * [`coefficients`]: coefficient systems and the determinant conditions.
//! * [`polytope`]: degenerate states, the cube-shaped feasibility polytope and
//!   the uniform gap `σ` computed with the dense [`simplex`] solver.
//! * [`fields`]: grids, fields, level sets, relative perimeters and the coarea
//!   and isoperimetric diagnostics.
//! * [`inequality`]: both sides of the inequality, blow-up sequences, the
//!   constant estimator, the entropy and the sampling verifiers.

pub mod coefficients;
pub mod error;
pub mod fields;
pub mod inequality;
pub mod linalg;
pub mod polytope;
pub mod simplex;
pub mod table;

pub use coefficients::{admissibility_margin, AdmissibilityReport, CoefficientSystem, IndexSet};
pub use error::{Error, Result};
pub use fields::{Grid, GridField, Region};
pub use polytope::{
    all_degenerate_states, degenerate_state, enumerate_vertices, lp_max_min_f, sigma_obs,
    truncation_bound, verify_cuboid, DegenerateState, DegenerateStates, PolytopeReport,
    SigmaCertificate,
};
