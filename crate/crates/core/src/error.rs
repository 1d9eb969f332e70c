use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Two grids that must share dimensions do not.
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    Dimension {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    /// A model reply could not be turned into the expected structure.
    #[error("unparseable agent response ({reason}): {raw}")]
    Parse { reason: String, raw: String },

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension { expected, actual })
        }
    }
}

/// Failures of external model backends (detector or VLM).
#[derive(Debug, Error)]
pub enum BackendError {
    /// The remote call failed after every allowed attempt.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    /// A replay fixture needed for this call does not exist.
    #[error("missing fixture {0}")]
    MissingFixture(PathBuf),

    /// Backend is misconfigured (no endpoint, no API key, bad fixture).
    #[error("backend configuration: {0}")]
    Config(String),

    /// The remote side answered with something we cannot decode.
    #[error("malformed backend payload: {0}")]
    Protocol(String),

    /// Scripted test backends use this to simulate an outage.
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}
