//! Command-line front end. Every subcommand reads its inputs from a run
//! directory, writes its outputs there, and records the effective
//! configuration in `config.json`, so stages can be chained or re-run.

mod args;
mod commands;
mod tables;

pub use args::{Cli, Command, GlobalArgs};

use clap::Parser;
use progress_core::Error;
use serde::Serialize;
use std::ffi::OsString;

/// Process exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;
/// Process exit status for data, I/O and numerical failures.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Input(_) => "input",
        Error::Io { .. } => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
        Error::Data(_) => "data",
        Error::Harmonize(_) => "harmonize",
        Error::MixedModel(_) => "mixed_model",
        Error::Trajectory(_) => "trajectory",
        Error::Survival(_) => "survival",
        Error::Stats(_) => "stats",
        Error::Net(_) => "network",
    }
}

/// Exit status for a pipeline error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Structured one-line error message for stderr.
pub fn error_json(e: &Error) -> String {
    let mut message = e.to_string();
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        let text = s.to_string();
        if !message.contains(&text) {
            message.push_str(": ");
            message.push_str(&text);
        }
        source = s.source();
    }
    let report = ErrorReport {
        error: ErrorBody {
            kind: error_kind(e),
            message,
            exit_code: exit_code(e),
        },
    };
    serde_json::to_string(&report)
        .unwrap_or_else(|_| "{\"error\":{\"kind\":\"internal\"}}".to_string())
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
