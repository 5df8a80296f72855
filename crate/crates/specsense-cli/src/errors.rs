//! Exit-code mapping: 0 success, 2 I/O, 3 configuration or arguments,
//! 4 degenerate or malformed data.

use specsense_core::Error as CoreError;

pub const EXIT_IO: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub source: anyhow::Error,
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.source)
    }
}

impl std::error::Error for CmdError {}

pub type CmdResult<T> = Result<T, CmdError>;

pub fn io_err(e: impl Into<anyhow::Error>) -> CmdError {
    CmdError { code: EXIT_IO, source: e.into() }
}

pub fn config_err(e: impl Into<anyhow::Error>) -> CmdError {
    CmdError { code: EXIT_CONFIG, source: e.into() }
}

pub fn data_err(e: impl Into<anyhow::Error>) -> CmdError {
    CmdError { code: EXIT_DATA, source: e.into() }
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Io(_) => EXIT_IO,
            CoreError::InvalidArgument(_) => EXIT_CONFIG,
            CoreError::InsufficientData(_)
            | CoreError::Degenerate(_)
            | CoreError::ShapeMismatch { .. }
            | CoreError::UnitMismatch(_)
            | CoreError::Format(_) => EXIT_DATA,
        };
        CmdError { code, source: e.into() }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        io_err(e)
    }
}
