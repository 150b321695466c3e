use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("matrix is not Hermitian positive definite")]
    SingularMatrix,
    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("Gram matrix is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid keyhole spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate channel estimate for user {0}")]
    DegenerateEstimate(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
