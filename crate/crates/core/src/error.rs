//! Error type shared by every fallible operation in the crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of samplers, state construction, and corpus handling.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A distribution or model parameter is outside its domain.
    InvalidParameter(&'static str),
    /// A precomputed table was asked for more than it holds.
    CapacityExceeded { requested: usize, max: usize },
    /// A weight vector summed to zero (or contained a negative or
    /// non-finite entry) where a proper distribution was required.
    DegenerateWeights,
    /// Two arguments that must agree in size did not.
    DimensionMismatch(&'static str),
    /// Text input could not be parsed; `line` is 1-based.
    Parse { line: usize, msg: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::CapacityExceeded { requested, max } => {
                write!(f, "capacity exceeded: requested {requested}, table holds {max}")
            }
            Error::DegenerateWeights => write!(f, "weight vector has no positive mass"),
            Error::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            Error::Parse { line, msg } => write!(f, "line {line}: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
