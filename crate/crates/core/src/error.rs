use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {format} data: {message}")]
    Format {
        format: &'static str,
        message: String,
    },

    #[error("png codec: {0}")]
    Png(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("predictor: {0}")]
    Predictor(#[from] crate::bracket::PredictorError),

    #[error("ply: {0}")]
    Ply(#[from] crate::gs::ply::PlyError),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("optimization diverged at iteration {iteration}: {message}")]
    Diverged { iteration: usize, message: String },
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { path: None, source }
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(format: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            message: message.into(),
        }
    }

    pub(crate) fn io_at(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: Some(path.into()),
            source,
        }
    }

    /// Wraps `self` with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than internal failures.
    pub fn is_input_error(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_input_error();
        }
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::Io { .. }
                | Error::Format { .. }
                | Error::Png(_)
                | Error::Json(_)
                | Error::Ply(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
