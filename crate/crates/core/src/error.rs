use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("design points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("correlation lengths must be finite and positive")]
    InvalidLength,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need more observations than trend functions (n = {n}, p = {p})")]
    TooFewPoints { n: usize, p: usize },
    #[error("trend matrix has rank {rank} < p = {p}; the model is not identifiable")]
    RankDeficient { rank: usize, p: usize },
    #[error("observations lie in the span of the trend (quadratic form {0:e})")]
    DegenerateObservation(f64),
    #[error("matrix factorization failed: {0}")]
    Factorization(String),
    #[error("posterior existence violated: {0}")]
    ExistenceViolation(String),
    #[error("non-finite log-density at coordinate {index}, value {theta}")]
    NonFiniteDensity { index: usize, theta: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty chain")]
    EmptyChain,
    #[error("optimization failed: {0}")]
    Optimization(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: &str) -> Error {
    Error::Domain(String::from(msg))
}
