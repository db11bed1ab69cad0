//! Command-line driver: synthetic benchmark, image registration, and
//! solver benchmarking.
//!
//! Exit codes: 0 converged, 2 solver did not converge, 1 usage or I/O
//! error.

mod bench_cmd;
mod register_cmd;
mod report;
mod synthetic_cmd;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Core(maot_core::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<maot_core::Error> for CliError {
    fn from(e: maot_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Resolves the output directory: the flag, then $MAOT_OUT_DIR, then
/// ./maot-out; creates it.
pub fn out_dir(flag: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os("MAOT_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("maot-out")),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Parser)]
#[command(
    name = "maot",
    version,
    about = "Periodic L2 optimal transport via damped Newton on the Monge-Ampere equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trigonometric benchmark with a known exact potential.
    Synthetic(synthetic_cmd::SyntheticArgs),
    /// Register two grayscale images by optimal transport.
    Register(register_cmd::RegisterArgs),
    /// Inner-iteration and stability benchmarking across grid sizes.
    Bench(bench_cmd::BenchArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    let outcome = match &cli.command {
        Command::Synthetic(args) => synthetic_cmd::run(args),
        Command::Register(args) => register_cmd::run(args),
        Command::Bench(args) => bench_cmd::run(args),
    };

    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
