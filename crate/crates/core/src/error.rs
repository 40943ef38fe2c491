use std::path::PathBuf;

use crate::metrics::EvalReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("degenerate longitude interval: endpoints coincide at {0}")]
    DegenerateInterval(f64),

    #[error("neighborhood contract violated: {0}")]
    NeighborhoodContract(String),

    #[error("stale activation cache: cache from model revision {cache}, model is at {model}")]
    StaleCache { cache: u64, model: u64 },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("PSNR undefined: target has zero data range")]
    PsnrUndefined(Box<EvalReport>),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
