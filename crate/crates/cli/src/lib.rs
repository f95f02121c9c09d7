//! Command-line front end for `expsumkit`: tables, exponential-sum
//! parameters and figure data as versioned CSV or JSON.

pub mod args;
pub mod commands;
pub mod output;

use std::fmt;

pub use args::Cli;
pub use commands::run;

/// Process exit status for usage errors (bad flags, bad files).
pub const EXIT_USAGE: i32 = 2;
/// Process exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String, std::io::Error),
    Numerical(expsumkit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(..) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<expsumkit::Error> for CliError {
    fn from(e: expsumkit::Error) -> Self {
        match e {
            expsumkit::Error::Domain(msg) | expsumkit::Error::Argument(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Io(path, e) => write!(f, "cannot write {path}: {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}
