use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("projection failed: point ({x}, {y}) maps to infinity")]
    Projection { x: f64, y: f64 },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("degenerate image: only {found} regions survived (need at least {needed})")]
    DegenerateImage { found: usize, needed: usize },

    #[error("measurement region exceeds the image bounds")]
    OutOfBounds,

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("descriptor family mismatch: {0} vs {1}")]
    FamilyMismatch(String, String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
