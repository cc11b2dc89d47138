//! Command-line front end: argument and config parsing, the analysis and
//! simulation commands, and CSV/JSON emission.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible offered load,
//! 4 solver failure, 1 I/O failure.

pub mod commands;
pub mod spec;
pub mod table;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use aloha_core::Error;

pub use commands::execute;
pub use spec::{parse_run_spec, RunSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn io(e: impl fmt::Display) -> Self {
        CliError { code: 1, message: format!("write failed: {e}") }
    }

    fn from_clap(e: clap::Error) -> Self {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                CliError { code: 0, message: e.render().to_string() }
            }
            _ => {
                let text = e.render().to_string();
                let first = text.lines().next().unwrap_or("invalid arguments");
                CliError::invalid(first.trim_start_matches("error: ").to_string())
            }
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InfeasibleLoad { .. } => 3,
            Error::FixedPointFailure { .. } => 4,
            _ => 2,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Parses `args` and runs the command. Data goes to `stdout` (or the
/// `--out` file); the returned error carries the exit code and diagnostic.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let spec = parse_run_spec(args)?;
    execute(&spec, stdout)
}
