use bistoch_core::{LedgerError, MatrixError, RandomizeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Randomize(#[from] RandomizeError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("guarantee targets not met: {0}")]
    TargetFailure(String),
    #[error("oracle check failed: {0}")]
    OracleFailure(String),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 1 validation error, 2 guarantee-target failure, 3 oracle failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::TargetFailure(_) => 2,
            CliError::OracleFailure(_) => 3,
            _ => 1,
        }
    }
}
