use std::path::PathBuf;

use thiserror::Error;

use crate::family::FamilyKind;

pub type Result<T> = std::result::Result<T, DdeError>;

#[derive(Debug, Error)]
pub enum DdeError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error(
        "exact enumeration needs {bits} latent bits but the cap is {cap}; \
         use the SAEM-based tools for models this large"
    )]
    Capacity { bits: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("operation not supported for the {0:?} family")]
    UnsupportedFamily(FamilyKind),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl DdeError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        DdeError::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DdeError::Validation(msg.into())
    }
}
