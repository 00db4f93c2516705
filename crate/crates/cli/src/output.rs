//! Files written into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use diner::signal::{save_image, write_raw_grid};
use diner::GridSignal;
use serde::Serialize;

use crate::config::{ExperimentConfig, Task};
use crate::error::{CliError, Result};
use crate::input::RAW_EXTENSION;

pub const RUN_FILE: &str = "run.toml";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const METRICS_FILE: &str = "metrics.csv";

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Saves a signal as PGM/PPM when it is a 1- or 3-channel image, else as a raw grid.
pub fn save_signal(dir: &Path, stem: &str, signal: &GridSignal) -> Result<PathBuf> {
    let image = signal.dims().len() == 2 && matches!(signal.d_out(), 1 | 3);
    let path = if image {
        let ext = if signal.d_out() == 1 { "pgm" } else { "ppm" };
        let p = dir.join(format!("{stem}.{ext}"));
        save_image(signal, &p)?;
        p
    } else {
        let p = dir.join(format!("{stem}.{RAW_EXTENSION}"));
        write_raw_grid(signal, &p)?;
        p
    };
    Ok(path)
}

#[derive(Serialize)]
struct RunMeta<'a> {
    task: &'a str,
    version: &'a str,
    seed: u64,
    precision: &'a str,
    config_sha256: String,
}

#[derive(Serialize)]
struct RunEcho<'a> {
    run: RunMeta<'a>,
    config: &'a ExperimentConfig,
}

/// Writes `run.toml`: run metadata plus the full effective configuration.
pub fn write_run_echo(cfg: &ExperimentConfig, task: Task) -> Result<()> {
    let echo = RunEcho {
        run: RunMeta {
            task: task.name(),
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            precision: cfg.precision.name(),
            config_sha256: cfg.hash(),
        },
        config: cfg,
    };
    let text = toml::to_string(&echo).map_err(|e| CliError::Config(e.to_string()))?;
    write(&cfg.out_dir.join(RUN_FILE), text)
}

/// Serializes a summary struct to `summary.toml`.
pub fn write_summary<S: Serialize>(cfg: &ExperimentConfig, summary: &S) -> Result<()> {
    let text = toml::to_string(summary).map_err(|e| CliError::Config(e.to_string()))?;
    write(&cfg.out_dir.join(SUMMARY_FILE), text)
}
