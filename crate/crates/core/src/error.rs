use std::io;
use std::path::Path;

use hgts_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HgtsError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("checkpoint integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl HgtsError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HgtsError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for numeric blow-ups (NaN/inf) from either layer.
    pub fn is_numeric(&self) -> bool {
        matches!(self, HgtsError::Numeric(_) | HgtsError::Tensor(TensorError::Numeric(_)))
    }
}

pub type Result<T, E = HgtsError> = std::result::Result<T, E>;
