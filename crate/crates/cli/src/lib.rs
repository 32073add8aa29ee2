//! `pmst` command-line front end.
//!
//! Exit codes: 0 on success, 2 when the input is invalid, 3 when the run
//! completed but the scientific verdict is negative (no certification, or
//! uniqueness not confirmed).

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;

pub mod args;
mod commands;
pub mod record;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", .source.name())]
    Core {
        #[from]
        source: pmst_core::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Outcome of a command that ran to completion.
pub(crate) enum Verdict {
    Positive,
    Negative,
}

/// Caps the global rayon pool at `PMST_THREADS` when set.
fn configure_threads() {
    if let Some(n) = std::env::var("PMST_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialised");
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match commands::dispatch(&cli) {
        Ok(Verdict::Positive) => EXIT_OK,
        Ok(Verdict::Negative) => EXIT_NEGATIVE,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
