use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("nilpotency step {0} is not supported (maximum is {max})", max = crate::algebra::MAX_STEP)]
    UnsupportedStep(usize),

    #[error("invalid Lie algebra: {0}")]
    InvalidAlgebra(String),

    #[error("matrix is not a derivation (max Leibniz violation {max_violation:e})")]
    NotADerivation { max_violation: f64 },

    #[error("control value {value:?} lies outside the control range")]
    ControlOutOfRange { value: Vec<f64> },

    #[error("invalid control range: {0}")]
    InvalidOmega(String),

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("time {time} is exceptional: I - exp(SA) is singular (|det| = {det:e})")]
    ExceptionalTime { time: f64, det: f64 },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("drift is not regular (det A = {det:e})")]
    NotRegular { det: f64 },

    #[error("Lie algebra rank condition fails (rank {rank} < dim {dim})")]
    RankConditionFails { rank: usize, dim: usize },

    #[error("steering failed: {0}")]
    SteeringFailed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}
