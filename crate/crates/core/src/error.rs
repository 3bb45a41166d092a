use std::path::PathBuf;

/// Errors produced anywhere in the placement pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no spatial relation expression found in instruction: {0:?}")]
    ParseFailure(String),

    #[error("LLM completion contains no (reference | relation) line")]
    LlmFormatFailure { completion: String },

    #[error("LLM endpoint unavailable: {0}")]
    LlmUnavailable(String),

    #[error("embedding key not found: {0:?}")]
    KeyNotFound(String),

    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate token: row {row} has zero norm")]
    DegenerateToken { row: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("no feasible placement: every cell is masked off")]
    InfeasiblePlacement,

    #[error("crop {bbox:?} lies outside a {width}x{height} raster")]
    CropOutOfBounds {
        bbox: [u32; 4],
        width: u32,
        height: u32,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Wraps an I/O failure on `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
