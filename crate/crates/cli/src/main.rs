#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod artifacts;
mod config;
mod experiments;

use experiments::{run_experiment, Completion, ExperimentSpec, Kind};

/// Experiments for the damped Euler-Riesz system.
#[derive(Debug, Parser)]
#[command(name = "riesz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one trajectory and stream diagnostics and snapshots.
    Simulate(RunArgs),
    /// Eigenvalue scans and asymptotic ratio tables of the mode matrix.
    LinearAnalyze(RunArgs),
    /// Decay-rate fits of the linear flow against the predicted exponents.
    DecayVerify(RunArgs),
    /// Partition-of-unity, Bernstein and Besov-norm reports on the configured grid.
    LpInspect(RunArgs),
    /// Run a family of simulations along one parameter axis.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized probes, recorded in every output header.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of concurrent workers.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Experiment name for the output headers; defaults to the subcommand.
    #[arg(long)]
    name: Option<String>,
}

fn spec_from(kind: Kind, args: RunArgs) -> Result<ExperimentSpec> {
    let loaded = config::load(args.config.as_deref())?;
    Ok(ExperimentSpec {
        name: args.name.unwrap_or_else(|| kind.as_str().to_string()),
        kind,
        config: loaded.config,
        config_digest: loaded.digest,
        out: args.out,
        seed: args.seed,
        workers: args.workers,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (Kind::Simulate, a),
        Command::LinearAnalyze(a) => (Kind::LinearAnalyze, a),
        Command::DecayVerify(a) => (Kind::DecayVerify, a),
        Command::LpInspect(a) => (Kind::LpInspect, a),
        Command::Sweep(a) => (Kind::Sweep, a),
    };
    let result = spec_from(kind, args).and_then(|spec| run_experiment(&spec));
    match result {
        Ok(Completion::Ok) => ExitCode::SUCCESS,
        Ok(Completion::Aborted(msg)) => {
            eprintln!("riesz: run aborted: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("riesz: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
