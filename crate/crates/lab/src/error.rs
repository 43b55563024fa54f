use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] dai_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Wrong magic bytes or an unsupported format version.
    #[error("{path}: incompatible file: {reason}")]
    Incompatible { path: PathBuf, reason: String },
    /// Truncated or internally inconsistent file.
    #[error("{path}: corrupt file: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{0}")]
    Usage(String),
    #[error("missing data: {0}")]
    Missing(String),
}

impl LabError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Short machine-readable category used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Core(dai_core::Error::NonFinite(_)) => "non_finite",
            LabError::Core(_) => "contract",
            LabError::Io { .. } => "io",
            LabError::Incompatible { .. } => "incompatible",
            LabError::Corrupt { .. } => "corrupt",
            LabError::Config(_) => "config",
            LabError::Usage(_) => "usage",
            LabError::Missing(_) => "missing",
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
