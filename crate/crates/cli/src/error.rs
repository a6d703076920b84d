use std::fmt;
use std::io;

/// Failure of a subcommand, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(io::Error),
    Numeric(hbvm::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<hbvm::Error> for CliError {
    fn from(e: hbvm::Error) -> Self {
        match e {
            hbvm::Error::InvalidArgument(msg) | hbvm::Error::Domain(msg) => CliError::Usage(msg),
            other => CliError::Numeric(other),
        }
    }
}

/// Prefixes an I/O error with the path it concerns.
pub fn at_path(path: &std::path::Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub type CliResult<T> = std::result::Result<T, CliError>;
