use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("controller design failed: {0}")]
    DesignFailure(String),

    #[error("closed loop is unstable: {0}")]
    Instability(String),

    #[error("basis is rank deficient at column `{column}`")]
    RankDeficient { column: String },

    #[error("learning diverged at trial {trial}")]
    Divergence { trial: usize },

    #[error(
        "kernel matrix is not positive definite (pivot {pivot}); add jitter or noise variance"
    )]
    IllConditionedKernel { pivot: usize },

    #[error("hyperparameter fit failed: {0}")]
    FitFailure(String),
}

impl Error {
    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid-config",
            Error::OutOfRange { .. } => "out-of-range",
            Error::InvalidInput(_) => "invalid-input",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::DesignFailure(_) => "design-failure",
            Error::Instability(_) => "instability",
            Error::RankDeficient { .. } => "rank-deficiency",
            Error::Divergence { .. } => "divergence",
            Error::IllConditionedKernel { .. } => "ill-conditioned-kernel",
            Error::FitFailure(_) => "fit-failure",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
