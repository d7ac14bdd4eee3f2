use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OTHER: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const SCHEMA: u8 = 4;
    pub const ARGUMENT: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] wackymeter_core::Error),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        use wackymeter_core::Error as E;
        match self {
            CliError::MissingFile(_) | CliError::Write { .. } => exit::IO,
            CliError::Usage(_) => exit::USAGE,
            CliError::Argument(_) => exit::ARGUMENT,
            CliError::Config { .. } => exit::SCHEMA,
            CliError::Core(e) => match e {
                E::Io { .. } => exit::IO,
                E::Parse { .. } | E::Validation(_) | E::DuplicateId(_) | E::IdMismatch { .. } => exit::SCHEMA,
                E::InvalidArgument(_) => exit::ARGUMENT,
            },
            CliError::Other(_) => exit::OTHER,
        }
    }

    pub fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Write {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
