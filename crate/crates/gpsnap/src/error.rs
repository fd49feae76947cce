use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] gpsnap_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
    #[error("at position {position} m: {source}")]
    AtPosition {
        position: f64,
        #[source]
        source: gpsnap_core::Error,
    },
}

impl AppError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        AppError::Io(format!("{}: {e}", path.display()))
    }

    /// Stable machine-readable identifier.
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Core(e) | AppError::AtPosition { source: e, .. } => e.kind(),
            AppError::Io(_) => "io",
            AppError::Parse(_) => "parse",
            AppError::Config(_) => "invalid-config",
        }
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Io(e.to_string())
    }
}
