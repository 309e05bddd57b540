//! `coe`: reference-group selection and probability-of-causation bounds
//! from trial data with a desire-for-treatment variable.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coe_core::report::SearchMode;

use crate::commands::{Preset, SimulateArgs};
use crate::config::AnalysisArgs;

/// Log verbosity, in `env_logger` filter syntax (e.g. `info`, `coe_core=debug`).
const LOG_ENV: &str = "COE_LOG";

#[derive(Parser)]
#[command(name = "coe", version, about = "Select reference groups for individual causal questions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search models and write the report for the target.
    Analyze(AnalysisArgs),
    /// Same as `analyze` with exhaustive enumeration.
    Enumerate(AnalysisArgs),
    /// Same as `analyze` with the Metropolis-Hastings sampler.
    Sample(AnalysisArgs),
    /// Generate a synthetic trial CSV.
    Simulate {
        /// Generator settings as JSON.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in generator; the default when no config is given.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Number of subjects (overrides the config).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the generated target as JSON.
        #[arg(long)]
        target_out: Option<PathBuf>,
    },
    /// Emit figure data as CSV or JSON.
    #[command(subcommand)]
    Figure(Figure),
}

#[derive(Subcommand)]
enum Figure {
    /// Matching-untreated factor over every (x00, x01) split.
    Hypergeom {
        n00: u64,
        n01: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Treated success ratio against untreated desire ratio, per model.
    /// Writes JSON when `--out` ends in `.json`, CSV otherwise.
    Diagnostics(Box<AnalysisArgs>),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => commands::analyze(args, None),
        Command::Enumerate(args) => commands::analyze(args, Some(SearchMode::Enumerate)),
        Command::Sample(args) => commands::analyze(args, Some(SearchMode::Mh)),
        Command::Simulate { config, preset, n, seed, out, target_out } => {
            commands::simulate(SimulateArgs { config, preset, n, seed, out, target_out })
        }
        Command::Figure(Figure::Hypergeom { n00, n01, out }) => commands::figure_hypergeom(n00, n01, out),
        Command::Figure(Figure::Diagnostics(args)) => commands::figure_diagnostics(*args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
