use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is rank deficient: condition number of JᵀJ is {condition:e}")]
    RankDeficient { condition: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("finite-difference step must be positive and finite, got {0}")]
    FdStepInvalid(f64),

    #[error("microstate count W[{index}] = {value} is not positive")]
    NonPositiveMicrostates { index: usize, value: f64 },

    #[error("quadrature did not converge: relative change {relative_change:e} after refinement")]
    QuadratureNotConverged { relative_change: f64 },

    #[error("Fisher matrix is singular (condition number {condition:e})")]
    SingularFisher { condition: f64 },

    #[error("field `{name}` is not strictly positive at flat index {index} (value {value})")]
    NonPositiveField { name: String, index: usize, value: f64 },

    #[error("density is not normalised: integral = {integral}")]
    NotNormalized { integral: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step must be positive and finite, got {0}")]
    StepInvalid(f64),

    #[error("trajectory ensemble is empty")]
    EmptyEnsemble,

    #[error("exp overflow: Q = {0} exceeds the guard of 700")]
    Overflow(f64),

    #[error("metric is degenerate at point {index}: |det g| = {det:e}")]
    DegenerateMetric { index: usize, det: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed file: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
