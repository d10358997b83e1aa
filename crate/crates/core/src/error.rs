use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value outside the domain of an operation (non-finite input, empty
    /// grid, zero window, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown activation site `{0}`")]
    UnknownSite(String),

    #[error("unknown activation kind `{0}`")]
    UnknownKind(String),

    #[error("invalid selector `{0}`")]
    InvalidSelector(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: truncated file ({len} bytes is not a multiple of {record} bytes)")]
    TruncatedFile {
        path: PathBuf,
        len: u64,
        record: usize,
    },

    #[error("{path}: record {record} has label byte {label} (expected 0..=9)")]
    BadLabel {
        path: PathBuf,
        record: usize,
        label: u8,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("dataset missing: {0}")]
    DatasetMissing(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
