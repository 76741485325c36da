//! `impulse-sir`: run bundled or file-based scenarios and turn their
//! trajectories into plot files.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure or optimizer
//! non-convergence, 4 I/O failure.

mod plot;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use impulse_sir::scenario::PRESETS;

#[derive(Parser)]
#[command(name = "impulse-sir", version, about = "Two-strain impulsive SIR scenarios on scale-free degree classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward pass; writes the trajectory and the cumulative cost series.
    Simulate(RunArgs),
    /// Forward and adjoint pass; writes the cost breakdown and the optimality report.
    Evaluate(RunArgs),
    /// Moves impulse times with intensities held fixed.
    OptimizeTimes(RunArgs),
    /// Chooses impulse intensities with times held fixed.
    OptimizeIntensities(RunArgs),
    /// Splits a trajectory CSV into two-column series files.
    PlotData(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ThetaArg {
    Closed,
    Summation,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled scenario.
    #[arg(long, value_parser = PRESETS)]
    preset: Option<String>,
    /// Output directory; overrides `run.output_dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the infection field. `summation` simulates every degree of
    /// the support, each starting from the scenario's default state.
    #[arg(long, value_enum)]
    theta_mode: Option<ThetaArg>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory CSV written by `simulate`.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Cumulative cost CSV; defaults to the `_cost.csv` sibling of the input.
    #[arg(long, value_name = "PATH")]
    cost: Option<PathBuf>,
    /// Output directory; defaults to the input's directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Failure classes that map onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Numeric(m) | Failure::Io(m) => m,
        }
    }
}

impl From<impulse_sir::Error> for Failure {
    fn from(e: impulse_sir::Error) -> Self {
        use impulse_sir::Error::*;
        match e {
            Domain(_) | Consistency(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => run::execute(run::Mode::Simulate, &a),
        Command::Evaluate(a) => run::execute(run::Mode::Evaluate, &a),
        Command::OptimizeTimes(a) => run::execute(run::Mode::OptimizeTimes, &a),
        Command::OptimizeIntensities(a) => run::execute(run::Mode::OptimizeIntensities, &a),
        Command::PlotData(a) => plot::execute(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
