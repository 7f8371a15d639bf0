use std::io;
use std::path::PathBuf;

/// Errors from file formats, audio IO and the command pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] timbrediff_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("audio file not found: {0}")]
    MissingAudio(PathBuf),
    #[error("{path}: malformed WAV header: {reason}")]
    MalformedWav { path: PathBuf, reason: String },
    #[error("{path}: unsupported WAV encoding: {reason}")]
    UnsupportedCodec { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("clip `{clip_id}`: {source}")]
    Clip { clip_id: String, source: Box<Error> },
    #[error("{0}")]
    Usage(String),
    #[error("no embedding or prediction for clip `{0}`")]
    Coverage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Clip { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
