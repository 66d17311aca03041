use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular value decomposition did not converge ({rows}x{cols})")]
    SvdNotConverged { rows: usize, cols: usize },

    #[error("singular linear system in row {row}")]
    SingularSystem { row: usize },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("no usable background evidence: every frame score is infinite")]
    NoBackgroundEvidence,

    #[error("ground truth required")]
    MissingGroundTruth,

    #[error("ground truth contains no positive pixels")]
    NoPositives,

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than the configuration
    /// or a numerical failure.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::NonFinite
                | Error::Data { .. }
                | Error::Io { .. }
                | Error::Json(_)
                | Error::MissingGroundTruth
                | Error::NoPositives
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Shape(_))
    }
}
