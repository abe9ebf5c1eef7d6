//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or argument is outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A vector file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The exact oracle refuses to run an O(n^2) pass this large.
    #[error("oracle refused: {pairs} pair comparisons exceed the exact limit of {limit}")]
    OracleLimit { pairs: u64, limit: u64 },

    /// Sampling was requested from a stratum that contains no pairs.
    #[error("empty stratum: no same-bucket pairs to sample")]
    EmptyStratum,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
