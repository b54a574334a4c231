use std::path::PathBuf;

use gate_diffkit::DiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GateError {
    /// Invalid shapes, sizes or parameters.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training failed at epoch {epoch}: {source}")]
    Training {
        epoch: usize,
        #[source]
        source: Box<GateError>,
    },

    #[error("{context}: {source}")]
    Fold {
        context: String,
        #[source]
        source: Box<GateError>,
    },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl GateError {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        GateError::Structural(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GateError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn training(epoch: usize, source: impl Into<GateError>) -> Self {
        GateError::Training {
            epoch,
            source: Box::new(source.into()),
        }
    }

    /// True for failures of the numerical kind (divergence, NaN, overflow).
    pub fn is_numerical(&self) -> bool {
        match self {
            GateError::Numerical(_) | GateError::Training { .. } => true,
            GateError::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<DiffError> for GateError {
    fn from(e: DiffError) -> Self {
        match e {
            DiffError::NonFinite { .. } => GateError::Numerical(e.to_string()),
            other => GateError::Structural(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, GateError>;
