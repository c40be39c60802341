//! `syntrophic`: command-line front end.
//!
//! Exit codes: 0 success, 1 hypothesis failure, 2 input error,
//! 3 dilution rate at a bifurcation threshold.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "syntrophic",
    version,
    about = "Equilibria, bifurcations, simulations and basins of a syntrophic chemostat"
)]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory for output files (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed for random probe placement.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample the growth hypotheses and print the report.
    Check,
    /// Thresholds, equilibria and regime at one dilution rate.
    Analyze(DilutionArg),
    /// Integrate the full or the reduced system.
    Simulate(SimulateArgs),
    /// Sweep the dilution rate and locate bifurcations.
    Sweep(SweepArgs),
    /// Basins of attraction and separatrix at one dilution rate.
    Basins(BasinsArgs),
}

#[derive(Args, Debug)]
pub struct DilutionArg {
    /// Dilution rate (defaults to the configured one).
    #[arg(long = "D", value_name = "VALUE")]
    pub dilution: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dilution: DilutionArg,

    /// Full initial state `s1,x1,s2,x2`.
    #[arg(
        long,
        value_name = "S1,X1,S2,X2",
        conflicts_with = "init_reduced",
        required_unless_present = "init_reduced",
        allow_hyphen_values = true
    )]
    pub init: Option<String>,

    /// Reduced initial state `x1,x2`.
    #[arg(long, value_name = "X1,X2", allow_hyphen_values = true)]
    pub init_reduced: Option<String>,

    /// Final time (defaults to 200 / D).
    #[arg(long, value_name = "T", allow_hyphen_values = true)]
    pub t_end: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Lower end of the dilution range
    #[arg(long, value_name = "D", allow_hyphen_values = true)]
    pub d_min: f64,

    /// Upper end of the dilution range
    #[arg(long, value_name = "D", allow_hyphen_values = true)]
    pub d_max: f64,

    /// Number of samples (defaults to 400 per unit of D).
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BasinsArgs {
    #[command(flatten)]
    pub dilution: DilutionArg,

    /// Cells per axis.
    #[arg(long, default_value_t = 100, value_name = "N")]
    pub resolution: usize,

    /// Probe pairs placed across the separatrix.
    #[arg(long, default_value_t = 50, value_name = "N")]
    pub probes: usize,

    /// Skip the SVG plot.
    #[arg(long)]
    pub no_svg: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
