use std::path::PathBuf;

pub type Result<T, E = LpmError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum LpmError {
    #[error(transparent)]
    Core(#[from] phasor_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: invalid CSV: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{0}")]
    Usage(String),
}

impl LpmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LpmError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LpmError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
