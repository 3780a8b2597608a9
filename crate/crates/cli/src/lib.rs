//! Command-line front end: argument parsing, config files and report
//! rendering over the `ssr-telescopy` library.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{execute, parse_report, Report};
pub use config::{CommandKind, FitKind, Format, Overrides, RunConfig};
pub use error::{CliError, Result};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SSR_TELESCOPY_THREADS";

#[derive(Parser, Debug)]
#[command(name = "ssr-telescopy", version, about = "QFI ratios, bounds, teleportation and estimation for SSR-restricted telescopy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Subcommand, Debug)]
pub enum Commands {
    /// QFI ratio of every catalog family at one photon number.
    Table1(CommonArgs),
    /// QFI ratio against photon number with the max-photon bound.
    Fig2(CommonArgs),
    /// Simulate the teleportation protocol and its Fisher information.
    Teleport(CommonArgs),
    /// Monte Carlo maximum-likelihood estimation against the Cramér–Rao bound.
    Estimate(CommonArgs),
    /// Maximize the QFI ratio over sector distributions.
    Optimize(CommonArgs),
    /// Max-photon or mean-photon upper bound on the QFI ratio.
    Bound(CommonArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// JSON file with default settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Cli {
    /// Merge file and flag settings into a validated config.
    pub fn into_config(self) -> Result<RunConfig> {
        let (kind, args) = match self.command {
            Commands::Table1(a) => (CommandKind::Table1, a),
            Commands::Fig2(a) => (CommandKind::Fig2, a),
            Commands::Teleport(a) => (CommandKind::Teleport, a),
            Commands::Estimate(a) => (CommandKind::Estimate, a),
            Commands::Optimize(a) => (CommandKind::Optimize, a),
            Commands::Bound(a) => (CommandKind::Bound, a),
        };
        let base = match &args.config {
            Some(path) => Overrides::from_file(path)?,
            None => Overrides::default(),
        };
        RunConfig::resolve(kind, args.overrides.over(base))
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse, execute and write the output of one invocation.
pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let cfg = cli.into_config()?;
    let text = execute(&cfg)?;
    match &cfg.out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
