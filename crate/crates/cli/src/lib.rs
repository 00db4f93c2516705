//! Command-line experiments: fitting, disorder and width studies, spectra,
//! lensless phase retrieval and hash-cost benchmarks.
//!
//! Every subcommand reads an optional TOML configuration, applies flag
//! overrides, writes `run.toml` (configuration echo plus its SHA-256) and its
//! reports into the output directory, and maps failures to exit codes:
//! 2 configuration, 3 data, 4 divergence, 5 disorder-invariance violation.

pub mod commands;
pub mod config;
pub mod error;
pub mod input;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Overrides, Precision, Task};
use error::Result;

#[derive(Debug, Parser)]
#[command(name = "diner", version, about = "Disorder-invariant implicit neural representation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one signal and export metrics, checkpoint, reconstruction and learned INR.
    Fit(CommonArgs),
    /// Train on the original, sorted and random arrangements and compare bit-wise.
    DisorderTest(CommonArgs),
    /// Fit once per table width and judge the PSNR curve against the attribute rank.
    WidthSweep(CommonArgs),
    /// Compare band-energy ratios of images and their learned INRs.
    Spectrum(CommonArgs),
    /// Recover a complex object from multi-height intensity measurements.
    Lensless(CommonArgs),
    /// Time training with and without the table, and table updates across lengths.
    BenchHash(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Input image or raw grid; replaces the configured input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Write zero wall times so repeated runs produce identical metrics files.
    #[arg(long)]
    pub no_timing: bool,
}

impl Command {
    fn split(&self) -> (Task, &CommonArgs) {
        match self {
            Command::Fit(a) => (Task::Fit, a),
            Command::DisorderTest(a) => (Task::DisorderTest, a),
            Command::WidthSweep(a) => (Task::WidthSweep, a),
            Command::Spectrum(a) => (Task::Spectrum, a),
            Command::Lensless(a) => (Task::Lensless, a),
            Command::BenchHash(a) => (Task::BenchHash, a),
        }
    }
}

/// Effective configuration for a parsed command line.
pub fn resolve(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        precision: args.precision,
        seed: args.seed,
        out_dir: args.out_dir.clone(),
        input: args.input.clone(),
        epochs: args.epochs,
        no_timing: args.no_timing,
    });
    Ok(cfg)
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let (task, args) = cli.command.split();
    commands::execute(task, &resolve(args)?)
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

