//! Shooting solver for the static, spherically symmetric 't Hooft–Polyakov monopole.
//!
//! The two radial profiles are found by integrating outward from a series start
//! at the origin and bisecting the two free shooting coefficients between
//! qualitatively different failure modes until the trajectory settles into the
//! broken vacuum.

// negated comparisons below deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod integrator;
pub mod io;
pub mod model;
pub mod ode;
pub mod origin;
pub mod shooter;

pub use error::{Error, Result};
pub use integrator::{
    classify, integrate, ClassifyMode, IntegratorControls, Outcome, OutcomeTag, Trajectory,
};
pub use model::{nondimensionalize, ps_exact, ModelParams, PhaseState, ScaledParams};
pub use origin::{initial_state, picard_verify, series_coefficients, ShootPoint};
