mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Moran and Wright-Fisher community simulations, moment closures and
/// long-time analytics driven by TOML run configs.
#[derive(Parser)]
#[command(name = "moranwf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ensemble of the Moran model or the diffusion.
    Simulate(Common),
    /// Integrate the moment closure.
    Moments(Common),
    /// Sweep the equilibrium Simpson index.
    Equilibrium(Common),
    /// Distribution functions of the absorption times (no immigration).
    Hitting(Common),
    /// Monte Carlo against the closure; exits with status 2 on failure.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override simulation.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override closure.order.
    #[arg(long)]
    order: Option<usize>,
    /// Log progress at info level.
    #[arg(short, long)]
    verbose: bool,
}

fn prepare(common: &Common) -> Result<RunConfig> {
    let level = if common.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let mut cfg = RunConfig::load(&common.config)?;
    commands::apply_overrides(&mut cfg, common.seed, common.order)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Simulate(c) => commands::simulate(&prepare(c)?, &c.out).map(|_| true),
        Command::Moments(c) => commands::moments(&prepare(c)?, &c.out).map(|_| true),
        Command::Equilibrium(c) => commands::equilibrium(&prepare(c)?, &c.out).map(|_| true),
        Command::Hitting(c) => commands::hitting(&prepare(c)?, &c.out).map(|_| true),
        Command::Compare(c) => commands::compare(&prepare(c)?, &c.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
