use std::path::PathBuf;
use std::process::ExitCode;

use gate_core::GateError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io { .. } | CliError::Data(_) => 4,
            CliError::Numerical(_) => 5,
        })
    }
}

impl From<GateError> for CliError {
    fn from(e: GateError) -> Self {
        if e.is_numerical() {
            return CliError::Numerical(e.to_string());
        }
        match e {
            GateError::Io { path, source } => CliError::Io { path, source },
            GateError::Format(_) => CliError::Data(e.to_string()),
            GateError::Fold { ref source, .. } if matches!(**source, GateError::Format(_)) => {
                CliError::Data(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}
