use std::io;

/// Errors produced by the signal-processing and diffusion routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid length: {0}")]
    InvalidLength(String),

    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("numerical rank deficiency: {0}")]
    NumericalRank(String),

    #[error("unknown noise schedule `{0}`")]
    UnknownSchedule(String),

    #[error("unknown diffusion step: {0}")]
    UnknownStep(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn length(msg: impl Into<String>) -> Self {
        Error::InvalidLength(msg.into())
    }
}

impl From<hound::Error> for Error {
    fn from(err: hound::Error) -> Self {
        match err {
            hound::Error::IoError(e) => Error::Io(e),
            hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV encoding".into()),
            other => Error::Format(other.to_string()),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Format(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
