//! `wmap`: simulate sensor logs, build wavelet occupancy maps from them,
//! and query, evaluate or summarize the result.

mod commands;
mod config;
mod error;
mod usage;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wavelet_map::exec::{set_worker_threads, Exec};

use crate::commands::{build, eval, query, simulate, stats};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "wmap", version, about = "Wavelet octree occupancy mapping")]
struct Cli {
    /// Base seed for simulation noise and evaluation sampling. Overrides the
    /// `seed` key of the run config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. 0 uses one per core, 1 runs everything on the main
    /// thread.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Run configuration (TOML): map, sensors, integrator and eval settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a scene along a trajectory into an observation log.
    Simulate(simulate::Args),
    /// Integrate observation logs into a map.
    Build(build::Args),
    /// Look up log-odds at points or over an axis-aligned slice.
    Query(query::Args),
    /// Score a map against held-out frames and scene ground truth.
    Eval(eval::Args),
    /// Print storage statistics of a map.
    Stats(stats::Args),
}

/// Settings shared by every subcommand.
pub struct Globals {
    pub seed: Option<u64>,
    pub exec: Exec,
    pub config: Option<PathBuf>,
}

impl Globals {
    pub fn run_config(&self) -> CliResult<config::RunConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::input("this command needs --config"))?;
        config::RunConfig::load(path)
    }

    pub fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    set_worker_threads(if cli.threads == 1 { 0 } else { cli.threads }).map_err(CliError::input)?;
    let globals = Globals {
        seed: cli.seed,
        exec: if cli.threads == 1 { Exec::Sequential } else { Exec::Parallel },
        config: cli.config,
    };
    match cli.command {
        Command::Simulate(args) => simulate::run(&globals, args),
        Command::Build(args) => build::run(&globals, args),
        Command::Query(args) => query::run(&globals, args),
        Command::Eval(args) => eval::run(&globals, args),
        Command::Stats(args) => stats::run(&globals, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("wmap: {err}");
            err.exit_code()
        }
        // The panic hook has already printed the message.
        Err(_) => ExitCode::from(3),
    }
}
