//! Command-line front end: statistics, database building, augmentation and
//! DWA simulation driven by one TOML project file.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use lidar_rebalance::{ErrorClass, Result};

pub use commands::{cmd_augment, cmd_build_db, cmd_dwa_sim, cmd_stats, cmd_synth};
pub use config::{ModeOverride, Overrides, ProjectConfig};

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "LIDAR_REBALANCE_LOG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lidar-rebalance",
    version,
    about = "Class rebalancing for LiDAR 3D detection datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Project configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the global seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the proposal mode: keep-donor-pose, occupancy-sample or conventional.
    #[arg(long)]
    pub mode: Option<ModeOverride>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-class object counts and percentages.
    Stats(Common),
    /// Build the ground-truth object database.
    BuildDb(Common),
    /// Insert database objects into every frame.
    Augment(Common),
    /// Simulate DWA balancing weights over a loss stream.
    DwaSim(Common),
    /// Write a synthetic street corpus into the dataset root.
    Synth(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Stats(c) | Command::BuildDb(c) | Command::Augment(c) | Command::DwaSim(c) | Command::Synth(c) => c,
        }
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Validation => EXIT_VALIDATION,
        ErrorClass::Io => EXIT_IO,
    }
}

/// Runs one command and returns its human-readable report.
pub fn run(cli: &Cli) -> Result<String> {
    let common = cli.command.common();
    let mut cfg = ProjectConfig::load(&common.config)?;
    cfg.apply(&Overrides {
        seed: common.seed,
        mode: common.mode,
        out: common.out.clone(),
    });
    Ok(match &cli.command {
        Command::Stats(_) => cmd_stats(&cfg)?.to_string(),
        Command::BuildDb(_) => cmd_build_db(&cfg)?.to_string(),
        Command::Augment(_) => cmd_augment(&cfg)?.to_string(),
        Command::DwaSim(_) => cmd_dwa_sim(&cfg)?.to_string(),
        Command::Synth(_) => format!("wrote {} frames to {}\n", cmd_synth(&cfg)?, cfg.dataset_root.display()),
    })
}
