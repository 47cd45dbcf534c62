//! `mpo-tomo`: generate test states, simulate measurements, reconstruct and
//! evaluate.
//!
//! Exit codes: 0 success or convergence, 1 runtime failure, 2 iteration
//! budget exhausted, 3 compression abort, 64 usage error.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpo_tomo::TomoError;

use crate::commands::UsageError;
use crate::manifest::Flags;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "mpo-tomo", version, about = "Maximum-likelihood tomography with matrix product states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a test state (thermal, ground or ghz).
    Generate(Flags),
    /// Simulate measurement counts for a state file.
    Measure(Flags),
    /// Reconstruct a state from a counts file.
    Reconstruct(Flags),
    /// Compare an estimate with the true state.
    Evaluate(Flags),
}

fn is_usage(e: &anyhow::Error) -> bool {
    if e.downcast_ref::<UsageError>().is_some() {
        return true;
    }
    matches!(
        e.downcast_ref::<TomoError>(),
        Some(TomoError::Parameter(_) | TomoError::Capability(_))
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let (flags, run): (&Flags, fn(&manifest::ExperimentManifest) -> anyhow::Result<i32>) = match &cli.command {
        Command::Generate(f) => (f, commands::generate),
        Command::Measure(f) => (f, commands::measure),
        Command::Reconstruct(f) => (f, commands::reconstruct),
        Command::Evaluate(f) => (f, commands::evaluate),
    };
    let result = flags.resolve().and_then(|p| run(&p));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}
