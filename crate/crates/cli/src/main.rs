//! `bilab`: command-line front end of the bilinear multiplier lab.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use bilinear_lab::LabError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BILAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "bilab", version, about = "Bilinear Fourier multiplier lab")]
struct Cli {
    #[command(flatten)]
    output: OutputArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OutputArgs {
    /// Directory for the JSON report and CSV tables
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
    /// File stem of the outputs (defaults to the command name)
    #[arg(long, global = true)]
    name: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Master seed of every random draw
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a bilinear multiplier to two stored functions
    Apply(commands::ApplyArgs),
    /// Sobolev, Triebel-Lizorkin and Hormander norms of a symbol
    Norms(commands::NormsArgs),
    /// Wavelet coefficients of a symbol and the piece estimates per level
    Decompose(commands::DecomposeArgs),
    /// Build one randomized counterexample instance and report its norms
    Counterexample(commands::CounterexampleArgs),
    /// Monte-Carlo scaling sweep over N with power-law fits
    Sweep(commands::SweepArgs),
    /// Run a built-in verification suite
    Verify(commands::VerifyArgs),
}

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// invalid configuration (exit 2)
    Usage(String),
    /// a module refused the input (exit 3)
    Guard(LabError),
    /// a verification check came out red (exit 1)
    Checks(String),
    /// I/O and other runtime errors (exit 1)
    Runtime(anyhow::Error),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        if e.is_guard() {
            Failure::Guard(e)
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Guard(_) => 3,
            Failure::Checks(_) | Failure::Runtime(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Guard(_) => "guard",
            Failure::Checks(_) => "checks",
            Failure::Runtime(_) => "runtime",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Checks(m) => m.clone(),
            Failure::Guard(e) => e.to_string(),
            Failure::Runtime(e) => format!("{e:#}"),
        }
    }
}

/// Machine-readable error record on stderr.
fn report_failure(f: &Failure) -> ExitCode {
    let record = serde_json::json!({
        "error": { "kind": f.kind(), "message": f.message(), "exit_code": f.code() }
    });
    eprintln!("{record}");
    ExitCode::from(f.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // help and version requests
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return report_failure(&Failure::Usage(e.kind().to_string()));
        }
    };
    match commands::run(cli.command, &cli.output) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => report_failure(&f),
    }
}
