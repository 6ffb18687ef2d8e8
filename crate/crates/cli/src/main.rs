//! `capset`: generate or load a dictionary, compute its capacity sets and
//! estimation functions, and write CSV/JSON outputs.
//!
//! Exit codes: 0 success, 1 other failure (I/O, oracle violations),
//! 2 numerical failure in an LP, 3 configuration error.

mod analyze;
mod args;
mod cache;
mod dict;
mod oracle;

use std::fmt;
use std::process::ExitCode;

use capset_core::CapsetError;
use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CapsetError),
    Output(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Output(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CapsetError> for CliError {
    fn from(e: CapsetError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Output(_) => 1,
            CliError::Core(e) => match e {
                CapsetError::NumericalFailure { .. } => 2,
                CapsetError::InvalidProblem(_)
                | CapsetError::InvalidShape(_)
                | CapsetError::InvalidParam(_)
                | CapsetError::TooLarge { .. }
                | CapsetError::OddSupport(_)
                | CapsetError::Format { .. } => 3,
                CapsetError::EmptyDomain | CapsetError::InvariantViolation(_) | CapsetError::Io(_) => 1,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

pub fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version go to stdout and are not errors.
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();

    let result = match cli.command {
        Command::Analyze(args) => analyze::run(args),
        Command::Oracle(args) => oracle::run(args),
        Command::Generate(args) => dict::generate(args).map(|()| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
