use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies on the singular set of field `{field}`")]
    SingularPoint { field: String, point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("field `{0}` has no analytic Jacobian")]
    NoAnalyticJacobian(String),

    #[error("field `{0}` has no analytic flow oracle")]
    NoFlowOracle(String),

    #[error("trajectory blew up at t={time}: |state| = {norm}")]
    BlowUp { time: f64, norm: f64 },

    #[error("step size underflow at t={time} (h={step})")]
    StiffnessFailure { time: f64, step: f64 },

    #[error("integration starts on the singular set at {0:?}")]
    StartOnSingularSet(Vec<f64>),

    #[error("adaptive quadrature did not reach tolerance {tol} (estimate {estimate})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("invalid radii: need 0 < R < rho, got R={inner}, rho={outer}")]
    InvalidRadii { inner: f64, outer: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampling region is empty or fully excluded: {0}")]
    RegionEmpty(String),

    #[error("all ensemble points were lost during transport")]
    AllPointsLost,

    #[error("point {0:?} is outside the grid bounds")]
    OutOfBounds(Vec<f64>),

    #[error("flow undefined on leg `{leg}`: {reason}")]
    FlowUndefined { leg: String, reason: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("exponent mismatch: 1/p0 + 1/p1 = {sum} but 1/q = {inv_q} (must agree and be <= 1)")]
    ExponentMismatch { sum: f64, inv_q: f64 },

    #[error("delta must be positive, got {0}")]
    NonpositiveDelta(f64),

    #[error("trajectory windows differ: {0}")]
    WindowMismatch(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
