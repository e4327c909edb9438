use std::fmt;
use std::io;
use std::path::PathBuf;

/// A type alias for `Result<T, Error>`.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the segmentation toolkit.
#[derive(Debug)]
pub enum Error {
    /// An input value violated a documented invariant.
    Validation(String),
    /// A configuration value is out of range or inconsistent.
    Config(String),
    /// An I/O operation failed on the given path.
    Io { path: PathBuf, source: io::Error },
    /// A file had the wrong format. `line` is 1-based when the format is line oriented.
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    /// A numeric quantity became NaN or infinite.
    NonFinite(String),
    /// The sequence exceeds the configured frame cap for the quadratic-memory
    /// clustering path.
    TooManyFrames { frames: usize, cap: usize },
    /// Training aborted; carries the epoch and video that produced the failure.
    Train {
        epoch: usize,
        video: String,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        line: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation(msg) => write!(f, "invalid input: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Parse {
                path,
                line: Some(line),
                message,
            } => write!(f, "{}:{line}: {message}", path.display()),
            Error::Parse {
                path,
                line: None,
                message,
            } => write!(f, "{}: {message}", path.display()),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::TooManyFrames { frames, cap } => write!(
                f,
                "sequence has {frames} frames, above the cap of {cap}; \
                 downsample the input (see the agnes downsample option) or raise the cap"
            ),
            Error::Train {
                epoch,
                video,
                message,
            } => write!(f, "training aborted at epoch {epoch}, video '{video}': {message}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
