//! CLI error type with the exit-code mapping: 0 success, 1 failed checks,
//! 2 invalid configuration or arguments, 3 numerical or I/O failure.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(lrdlab_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(lrdlab_core::Error::InvalidArgument(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid config: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<lrdlab_core::Error> for CliError {
    fn from(e: lrdlab_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
