//! `sldual`: runs solver pipelines from a flat configuration file and writes
//! CSV results.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::ExperimentConfig;
use pipeline::{Failure, Mode};

#[derive(Parser)]
#[command(
    name = "sldual",
    version,
    about = "Primal/dual semi-Lagrangian experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Ladder level `k` for single-level commands (default `k_max`).
    #[arg(long, global = true)]
    level: Option<u32>,
    /// Quantity tabulated by `convergence`.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Primal surface at one level.
    SolvePrimal,
    /// Dual surface at one level.
    SolveDual,
    /// Duality gap and a posteriori bounds at t = 0 for one level.
    Gap,
    /// Error or gap norms and orders over the ladder.
    Convergence,
    /// A priori estimates against measured error and gap over the ladder,
    /// plus the bound report at one level.
    Bounds,
    /// Exact product-chain expectation E[X Y] for several step counts.
    PolarCheck,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Error,
    Gap,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let mode = cli.mode.map(|m| match m {
        ModeArg::Error => Mode::Error,
        ModeArg::Gap => Mode::Gap,
    });
    let result = match cli.command {
        Command::SolvePrimal => pipeline::solve_surface(&cfg, &cli.out, cli.level, false),
        Command::SolveDual => pipeline::solve_surface(&cfg, &cli.out, cli.level, true),
        Command::Gap => pipeline::gap(&cfg, &cli.out, cli.level),
        Command::Convergence => pipeline::convergence(&cfg, &cli.out, mode),
        Command::Bounds => pipeline::bounds(&cfg, &cli.out, cli.level),
        Command::PolarCheck => pipeline::polar(&cfg, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(1)
        }
    }
}
