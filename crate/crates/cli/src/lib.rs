//! Command-line front end: configuration files and the `run`, `validate`,
//! `bench` and `calibrate` commands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_bench, cmd_calibrate, cmd_run, cmd_validate, Invocation, OutputDir};
pub use config::ConfigError;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "RSS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rss", version, about = "Walk-jump sampling of relaxed sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one sampling chain.
    Run(CommonArgs),
    /// Run the soft masked-model validation suite.
    Validate(CommonArgs),
    /// Run the sampling-vs-optimization mode discovery benchmark.
    Bench(CommonArgs),
    /// Fit the masked-model temperature to a reference.
    Calibrate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed (overrides `seed` in the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

impl From<&CommonArgs> for Invocation {
    fn from(a: &CommonArgs) -> Self {
        Invocation {
            config: a.config.clone(),
            out: a.out.clone(),
            seed: a.seed,
            force: a.force,
        }
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(&a.into()),
        Command::Validate(a) => cmd_validate(&a.into()),
        Command::Bench(a) => cmd_bench(&a.into()),
        Command::Calibrate(a) => cmd_calibrate(&a.into()),
    }
}

/// 2 for configuration errors, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<ConfigError>()) {
        2
    } else {
        1
    }
}
