//! `magnls` — command-line driver for the magnetic NLS toolkit: soliton
//! constants, seeded property suites, dichotomy classification, time
//! evolution, variational ground states, and the dilation-instability
//! experiment.
//!
//! Every command writes its artifacts under `--out`: a `report.json` whose
//! keys are sorted and which carries the resolved configuration (so a report
//! is its own provenance), CSV series where a time evolution is involved, and
//! binary field checkpoints. Reports contain no timestamps; identical
//! configuration and seed reproduce them byte for byte at any worker count.
//!
//! Exit codes: 0 — success (including runs that *detect* blow-up: the
//! detection is the result); 1 — malformed configuration or unreadable
//! input; 2 — a precondition of the requested analysis was refused;
//! 3 — a solver failed to converge or a check found violations.

mod commands;
mod config;
mod data;
mod reports;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use magnls_core::error::Error;

/// A command's terminal failure: what to print and which code to exit with.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    /// Malformed configuration (exit 1), naming the offending field.
    pub fn config(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    /// A completed run whose checks found violations (exit 3).
    pub fn violations(message: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = if e.is_refusal() {
            2
        } else {
            match e {
                Error::InvalidGrid(_)
                | Error::InvalidParams(_)
                | Error::ShapeMismatch { .. }
                | Error::NonFinite(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_) => 1,
                _ => 3,
            }
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    magnls_core::field_grid::init_thread_pool_from_env();
    let cli = match config::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; everything else is a
            // configuration error, and `2` is reserved for refusals here.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("magnls: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
