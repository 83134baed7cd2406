use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error("reduction check failed: largest residual {max_residual:e}")]
    LemmaFailure { max_residual: f64 },
}

impl CliError {
    /// Process exit code.
    pub fn code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Data(_) => 2,
            Self::LemmaFailure { .. } => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Data(format!("{}: {e}", path.display()))
    }
}

impl From<shiftkit::Error> for CliError {
    fn from(e: shiftkit::Error) -> Self {
        Self::Data(e.to_string())
    }
}
