//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (bad hyperparameter, malformed config file, unknown key).
    #[error("config error: {0}")]
    Config(String),

    /// A tensor-shape or index contract was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input signal shorter than the minimum the operation supports.
    #[error("input too short: got {got} samples, need at least {min}")]
    InputTooShort { got: usize, min: usize },

    /// Sample-rate mismatch between a file and the toolkit's fixed rate.
    #[error("sample rate mismatch: file is {got} Hz, expected {expected} Hz (no resampling is performed)")]
    SampleRate { got: u32, expected: u32 },

    /// Malformed audio file.
    #[error("wav error in {path}: {msg}")]
    Wav { path: PathBuf, msg: String },

    /// Malformed annotation or manifest text.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Checkpoint file cannot be read back.
    #[error("checkpoint error in {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    /// Numeric failure during optimization (non-finite loss or gradient).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Dataset-level problem (empty manifest, missing annotations, key mismatch).
    #[error("data error: {0}")]
    Data(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
