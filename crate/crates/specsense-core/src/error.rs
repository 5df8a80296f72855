//! Crate-wide error type.

use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the sensing and modeling pipeline.
#[derive(Debug)]
pub enum Error {
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// Not enough data to carry the operation out (short captures, tiny
    /// point sets, too few usable lags).
    InsufficientData(String),
    /// The data is structurally valid but degenerate for the requested
    /// operation (all-idle grid, zero-variance sequence).
    Degenerate(String),
    /// Two grids or sequences that must share a shape do not.
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    /// Linear-unit input required but dB-domain values were supplied, or
    /// vice versa.
    UnitMismatch(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// A file did not parse as the expected format.
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::InsufficientData(m) => write!(f, "insufficient data: {m}"),
            Error::Degenerate(m) => write!(f, "degenerate data: {m}"),
            Error::ShapeMismatch { expected, got } => write!(
                f,
                "shape mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::UnitMismatch(m) => write!(f, "unit mismatch: {m}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Format(m) => write!(f, "format error: {m}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
