//! `pcreg` binary: weighted sampling, coherence estimation, coefficient
//! fitting, recovery and surface-reaction studies, and sample-count
//! planning, each emitting a CSV with an adjacent key=value manifest.

mod commands;
mod config;
mod csvout;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pcreg",
    version,
    about = "Polynomial chaos sampling, fitting, and study runner",
    after_help = "Exit codes: 0 success, 1 runtime failure, 2 usage error.\n\
                  If PCREG_OUT_DIR is set, relative --out paths are placed under it."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a weighted input sample and write it as CSV
    Sample(commands::SampleArgs),
    /// Estimate coherence parameters over a basis and strategy grid
    Coherence(commands::CoherenceArgs),
    /// Fit expansion coefficients from a weighted sample CSV
    Fit(commands::FitArgs),
    /// Measure recovery probability on manufactured expansions
    Recovery(commands::RecoveryArgs),
    /// Compare sampling strategies on the surface-reaction model
    Ode(commands::OdeArgs),
    /// Compute the sample count an error budget requires
    Plan(commands::PlanArgs),
}

/// Failures split by exit code: usage mistakes exit 2, runtime failures
/// (numerical errors, unreadable or unwritable files) exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<pcreg::Error> for CliError {
    fn from(err: pcreg::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(args) => commands::sample(args),
        Command::Coherence(args) => commands::coherence(args),
        Command::Fit(args) => commands::fit(args),
        Command::Recovery(args) => commands::recovery(args),
        Command::Ode(args) => commands::ode(args),
        Command::Plan(args) => commands::plan(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {}", err.message());
        std::process::exit(err.code());
    }
}
