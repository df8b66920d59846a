//! Command-line driver: argument parsing, run configuration and the
//! subcommand implementations behind the `terrasynth` binary.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, out-of-range values, or a failed domain check.
    #[error("{0}")]
    Validation(String),
    /// Unreadable inputs or unwritable outputs.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "terrasynth", version, about = "Ray-traced terrain views and synthetic aerial datasets")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print terrain dimensions, nodata and texture co-registration.
    Inspect {
        terrain: PathBuf,
        #[arg(long)]
        texture: Option<PathBuf>,
        /// Texture meters per pixel.
        #[arg(long, default_value_t = 0.25)]
        pixel_scale: f64,
        /// Also build the BVH and dump its nodes as CSV.
        #[arg(long)]
        bvh_csv: Option<PathBuf>,
    },
    /// Print the bilinear terrain height at world (x, y).
    Probe {
        terrain: PathBuf,
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
    },
    /// Render one orthographic map plus its depth map.
    RenderMap {
        #[command(flatten)]
        run: RunArgs,
        /// Sun azimuth override, degrees.
        #[arg(long)]
        az: Option<f64>,
        /// Sun elevation override, degrees.
        #[arg(long)]
        el: Option<f64>,
    },
    /// Render one perspective observation at (x, y) and AGL.
    RenderObs {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long)]
        agl: f64,
        #[arg(long, default_value = "obs")]
        id: String,
    },
    /// Render the sun-sweep maps and sampled observations with a manifest.
    GenDataset {
        #[command(flatten)]
        run: RunArgs,
        /// Number of observations (overrides the config).
        #[arg(long)]
        n_obs: Option<usize>,
    },
    /// Run the embedded oracle suites.
    Selftest,
}

/// Options shared by every config-driven subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub resample: Option<f64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Validate and print the plan without rendering or writing anything.
    #[arg(long)]
    pub dry_run: bool,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Inspect { terrain, texture, pixel_scale, bvh_csv } => {
            commands::inspect(&terrain, texture.as_deref(), pixel_scale, bvh_csv.as_deref())
        }
        Command::Probe { terrain, x, y } => commands::probe(&terrain, x, y),
        Command::RenderMap { run, az, el } => commands::render_map(&run, az, el),
        Command::RenderObs { run, x, y, agl, id } => commands::render_obs(&run, x, y, agl, &id),
        Command::GenDataset { run, n_obs } => commands::gen_dataset(&run, n_obs),
        Command::Selftest => commands::selftest(),
    }
}
