//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
///
/// The CLI maps variants to exit codes: argument/usage problems → 1,
/// data/format problems → 2, numerical failures → 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error in {path} (row {row}): {message}")]
    Format {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("initialization error: {0}")]
    Init(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Init(_) => 1,
            Error::Format { .. } | Error::Parse(_) | Error::Io(_) => 2,
            Error::SingularDesign(_) | Error::Numerical(_) => 3,
        }
    }
}
