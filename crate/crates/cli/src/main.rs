//! `atomcov` command-line tool. Every command takes a JSON config file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use commands::Status;

#[derive(Parser)]
#[command(name = "atomcov", version, about = "Structured covariance estimation, CRBs and benchmarks")]
struct Cli {
    /// Worker threads for Monte-Carlo trials; results do not depend on it.
    #[arg(long, global = true, env = "ATOMCOV_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a structured covariance to a snapshot file.
    Estimate(RunArgs),
    /// Draw Gaussian snapshots from a covariance model.
    Simulate(RunArgs),
    /// Monte-Carlo experiments.
    #[command(subcommand)]
    Bench(Bench),
    /// Cramér-Rao bound for a covariance and structure.
    Crb(RunArgs),
}

#[derive(Subcommand)]
enum Bench {
    /// MSE against the true parameter vector over a grid of sample sizes.
    Mse(RunArgs),
    /// Average adaptive-beamformer SINR over an angle grid.
    Sinr(RunArgs),
    /// Per-iteration objective traces of atom1 and atom2.
    Convergence(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    config: PathBuf,

    /// Override a config entry, e.g. `--set atom2.gamma0=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Estimate(a) => commands::estimate(&config::load(&a.config, &a.set)?),
        Command::Simulate(a) => commands::simulate(&config::load(&a.config, &a.set)?),
        Command::Crb(a) => commands::crb(&config::load(&a.config, &a.set)?),
        Command::Bench(Bench::Mse(a)) => commands::bench_mse(&config::load(&a.config, &a.set)?),
        Command::Bench(Bench::Sinr(a)) => commands::bench_sinr(&config::load(&a.config, &a.set)?),
        Command::Bench(Bench::Convergence(a)) => commands::bench_convergence(&config::load(&a.config, &a.set)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: iteration limit reached before convergence; results were written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
