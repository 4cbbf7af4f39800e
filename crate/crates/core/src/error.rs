use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("densities are defined on different grids")]
    GridMismatch,
    #[error("empty sample")]
    EmptySample,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("need at least 2 distinct samples to estimate a bandwidth")]
    DegenerateSample,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not enough training pairs: need at least {needed}, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("input point outside the model domain")]
    OutOfDomain,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadratic program is infeasible")]
    Infeasible,
    #[error("quadratic program Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("quadratic program did not terminate within {0} iterations")]
    IterationLimit(usize),
    #[error("bandwidth optimization failed from every starting point")]
    OptimizerFailed,
}

pub type Result<T> = core::result::Result<T, Error>;
