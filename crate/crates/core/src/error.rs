// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range 0..{len}")]
    Index { index: usize, len: usize },

    #[error("invalid grid plan: {0}")]
    Plan(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dual ascent did not converge: max mass deviation {deviation:.3e} after {iterations} iterations")]
    Convergence { deviation: f64, iterations: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 2 IO/parse, 3 configuration, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Parse { .. } => 2,
            Error::Convergence { .. } | Error::Sampling(_) | Error::Internal(_) => 4,
            Error::Input(_)
            | Error::Shape(_)
            | Error::Index { .. }
            | Error::Plan(_)
            | Error::Config(_)
            | Error::ModeMismatch(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
