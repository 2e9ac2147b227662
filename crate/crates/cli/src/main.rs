use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;

/// Default worker count when `--threads` is not given.
const THREADS_ENV: &str = "TWOPRICE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl From<twoprice::Error> for CliError {
    fn from(e: twoprice::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "twoprice", version, about = "Admission-control experiments for a reusable resource")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize and evaluate policies on one instance.
    Solve(CommonArgs),
    /// Loss against capacity for scaled instance families.
    Scale(CommonArgs),
    /// Random small-capacity instances.
    SmallStock(CommonArgs),
    /// Build, verify and replay dual certificates.
    Certify(CommonArgs),
    /// Simulate a policy under several usage-time distributions.
    Simulate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to $TWOPRICE_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Check the results against the expectations in the config.
    #[arg(long)]
    pub check: bool,
    /// Write 0 in the wall_ms column so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

fn threads(args: &CommonArgs) -> Result<Option<usize>, CliError> {
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        return Ok(Some(k));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, f): (CommonArgs, fn(&CommonArgs) -> Result<(), CliError>) = match cli.command {
        Command::Solve(a) => (a, commands::solve),
        Command::Scale(a) => (a, commands::scale),
        Command::SmallStock(a) => (a, commands::small_stock),
        Command::Certify(a) => (a, commands::certify),
        Command::Simulate(a) => (a, commands::simulate),
    };
    match threads(&args)? {
        Some(k) => twoprice::par::with_threads(k, || f(&args)),
        None => f(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("twoprice: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
