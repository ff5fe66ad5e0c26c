use thiserror::Error;

use crate::integrator::OutcomeTag;

/// Failures raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("singular point: t = {0} must be positive")]
    SingularPoint(f64),

    #[error("series handoff radius {t0} outside (0, {t0_max}]")]
    HandoffDomain { t0: f64, t0_max: f64 },

    #[error("Picard iteration outside contraction domain: s_max = {s_max} > -S = {threshold}")]
    ContractionDomain { s_max: f64, threshold: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("no sign change on [{lo}, {hi}]")]
    NoEvent { lo: f64, hi: f64 },

    #[error("trajectory integrity violated: {0}")]
    Integrity(String),

    #[error("bracketing failed: lower probe {lo} -> {lo_outcome:?}, upper probe {hi} -> {hi_outcome:?}")]
    Bracketing {
        lo: f64,
        hi: f64,
        lo_outcome: OutcomeTag,
        hi_outcome: OutcomeTag,
    },

    #[error("profile outside convergence tube at t = {0}")]
    GraftDomain(f64),

    #[error("audit requires a converged profile: {0}")]
    AuditDomain(String),

    #[error("probe profile leaves (0, 1] at t = {t} (p = {p})")]
    SturmDomain { t: f64, p: f64 },

    #[error("decay fit domain: {0}")]
    FitDomain(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
