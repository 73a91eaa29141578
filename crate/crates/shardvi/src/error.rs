//! Error types shared across the crate.
//!
//! Contract violations (bad arguments, malformed models) are reported as
//! [`Error::Contract`] with a human-readable message; structural problems
//! that callers may want to inspect programmatically get their own variants
//! with witness data, e.g. [`Error::Disconnected`] carries the connected
//! components.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    /// An API precondition was violated; the message names the condition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A graph operation required connectivity; the payload lists the
    /// connected components (each sorted) as a witness.
    #[error("dependency graph is disconnected ({} components)", .0.len())]
    Disconnected(Vec<Vec<usize>>),

    /// A text artifact (MDP, partition, graph, report) failed to parse.
    #[error("parse error at {location}: {message}")]
    Parse {
        /// Where in the input the problem was found.
        location: String,
        /// What went wrong.
        message: String,
    },

    /// Configuration file or CLI arguments are inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Fail with [`Error::Contract`] unless `cond` holds. The remaining
/// arguments feed `format!` for the message.
macro_rules! ensure_contract {
    ($cond:expr, $($arg:tt)*) => {
        if !($cond) {
            return Err($crate::error::Error::Contract(format!($($arg)*)));
        }
    };
}

pub(crate) use ensure_contract;
