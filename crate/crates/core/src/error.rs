//! Crate-wide error type.
//!
//! Errors are reserved for genuine failures: malformed inputs, violated
//! preconditions and exhausted refinement depth. Negative or undecided
//! mathematical outcomes are not errors; they are verdicts with certificates
//! and travel through the ordinary return values.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A structural invariant of a diagram is violated.
    #[error("structural error: {0}")]
    Structure(String),

    /// An operation needed deeper diagram data than is materialized, or the
    /// refinement budget was exhausted before an exact answer was reached.
    #[error("depth exhausted: {0}")]
    Depth(String),

    /// Caller violated an operation contract (bad arguments, inconsistent
    /// matrices, sets that do not partition, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An operation refusing to run because a required certificate is
    /// missing or negative. Carries a human-readable description of the
    /// offending precondition.
    #[error("precondition not certified: {0}")]
    Refused(String),

    /// Integer overflow in exact arithmetic. Inputs were too large for the
    /// fixed-width representation; no approximate answer is produced.
    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    /// Parse error for the text file formats, with 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn depth(msg: impl Into<String>) -> Self {
        Error::Depth(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn refused(msg: impl Into<String>) -> Self {
        Error::Refused(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
