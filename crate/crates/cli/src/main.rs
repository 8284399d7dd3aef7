//! `fpep`: curves, attack descriptions, Monte Carlo runs and verification
//! for entangling-probe attacks on BB84.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpep_core::EGrid;

use crate::output::Failure;

#[derive(Parser, Debug)]
#[command(name = "fpep", version, about = "Entangling-probe attacks on BB84")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discarded-fraction curves on a QBER grid.
    Curves(CurvesArgs),
    /// Describe one attack as JSON.
    Attack(AttackArgs),
    /// Simulate an exchange and Eve's measurement.
    Montecarlo(MonteCarloArgs),
    /// Run the invariant suite; exit status 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AttackType {
    /// CNOT probe, optimal for error discard.
    Sb,
    /// Imbalance chosen to maximise the discarded fraction.
    Optimal,
    /// Explicit (e, delta).
    Param,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SimulatedAttack {
    Sb,
    Optimal,
    Param,
    Identity,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Seed for every random draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    /// QBER grid as start:stop:step.
    #[arg(long, default_value = "0:0.5:0.005", value_parser = parse_grid)]
    grid: EGrid,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[arg(value_enum)]
    kind: AttackType,
    /// QBER.
    #[arg(long)]
    e: f64,
    /// Imbalance; required for `param`.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct MonteCarloArgs {
    #[arg(value_enum)]
    kind: SimulatedAttack,
    /// QBER; ignored for `identity`.
    #[arg(long, default_value_t = 0.1)]
    e: f64,
    /// Imbalance; required for `param`.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Number of signals.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Also write per-round records as CSV to this path.
    #[arg(long)]
    records: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Random feasible points checked against the bound.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    /// Haar-random unitaries symmetrized.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Test hook: shift the imbalance of the optimal attacks before
    /// checking that they attain the bound.
    #[arg(long, hide = true, allow_hyphen_values = true)]
    perturb_delta: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_grid(s: &str) -> Result<EGrid, String> {
    s.parse().map_err(|e: fpep_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Curves(args) => commands::curves(&args),
        Command::Attack(args) => commands::attack(&args),
        Command::Montecarlo(args) => commands::montecarlo(&args),
        Command::Verify(args) => commands::verify(&args),
    };
    match result {
        Ok(()) | Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("fpep: {failure}");
            match failure {
                Failure::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
