use std::fmt::Write as _;

use diner::model::{evaluate_psnr, extract_learned_inr, train};
use diner::spectrum::{band_ratios_csv, dft2_channel, signal_band_ratios, spectrum_csv};
use diner::{GridSignal, Real};
use log::info;
use serde::Serialize;

use super::diner_model;
use crate::config::{ExperimentConfig, ModelKind};
use crate::error::{CliError, Result};
use crate::input::load_signals;
use crate::output;

pub const REPORT_FILE: &str = "spectrum.csv";

#[derive(Serialize)]
struct SpectrumSummary {
    images: usize,
    bands: usize,
    energy: &'static str,
    band_layout: &'static str,
    low_band_increases: usize,
    low_band_increase_fraction: f64,
    mean_original_low_band: f64,
    mean_learned_inr_low_band: f64,
}

fn write_channel_spectra(cfg: &ExperimentConfig, stem: &str, signal: &GridSignal) -> Result<()> {
    for c in 0..signal.d_out() {
        let spec = dft2_channel(signal, c)?;
        output::write(&cfg.out_dir.join(format!("{stem}_spectrum_c{c}.csv")), spectrum_csv(&spec))?;
    }
    Ok(())
}

pub fn run<T: Real>(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.model.kind != ModelKind::Diner {
        return Err(CliError::Config("spectrum needs model.kind = \"diner\"".into()));
    }
    if cfg.model.table_width.is_some_and(|l| l != 2) {
        return Err(CliError::Config("spectrum meshes a 2D learned INR; set model.table_width = 2 or leave it unset".into()));
    }
    let signals = load_signals(cfg)?;
    if let Some(s) = signals.iter().find(|s| s.dims().len() != 2) {
        return Err(CliError::Data(format!("spectrum needs 2D images, got extents {:?}", s.dims())));
    }
    let bands = cfg.spectrum.bands;
    let tc = cfg.train_config();
    let mut csv = String::from("image,psnr_db");
    for stem in ["original", "learned_inr"] {
        for k in 0..bands {
            let _ = write!(csv, ",{stem}_band_{k}");
        }
    }
    csv.push('\n');

    let (mut increases, mut sum_orig, mut sum_inr) = (0, 0.0, 0.0);
    for (i, signal) in signals.iter().enumerate() {
        let mut model = diner_model::<T>(cfg, signal.len(), 2, signal.d_out())?;
        train(&mut model, signal, &tc)?;
        let psnr = evaluate_psnr(&model, signal)?;
        let resolution = cfg.spectrum.resolution.map_or_else(|| signal.dims().to_vec(), |r| r.to_vec());
        let inr = extract_learned_inr(&model, &resolution)?;
        let orig = signal_band_ratios(signal, bands)?;
        let learned = signal_band_ratios(&inr, bands)?;
        info!("image {i}: PSNR {psnr:.2} dB, low band {:.4} -> {:.4}", orig[0], learned[0]);
        if learned[0] > orig[0] {
            increases += 1;
        }
        sum_orig += orig[0];
        sum_inr += learned[0];
        let _ = write!(csv, "{i},{psnr}");
        for r in orig.iter().chain(&learned) {
            let _ = write!(csv, ",{r}");
        }
        csv.push('\n');

        if signals.len() == 1 {
            output::write(&cfg.out_dir.join("original_bands.csv"), band_ratios_csv(&orig))?;
            output::write(&cfg.out_dir.join("learned_inr_bands.csv"), band_ratios_csv(&learned))?;
            write_channel_spectra(cfg, "original", signal)?;
            write_channel_spectra(cfg, "learned_inr", &inr)?;
            output::save_signal(&cfg.out_dir, "learned_inr", &inr.clamped())?;
        }
    }
    output::write(&cfg.out_dir.join(REPORT_FILE), csv)?;
    let count = signals.len();
    let summary = SpectrumSummary {
        images: count,
        bands,
        energy: "|F|^2",
        band_layout: "equal-width annuli of radial frequency normalized to the largest on the grid",
        low_band_increases: increases,
        low_band_increase_fraction: increases as f64 / count as f64,
        mean_original_low_band: sum_orig / count as f64,
        mean_learned_inr_low_band: sum_inr / count as f64,
    };
    output::write_summary(cfg, &summary)?;
    println!(
        "spectrum: low-band ratio rose on {increases}/{count} images (mean {:.4} -> {:.4})",
        summary.mean_original_low_band, summary.mean_learned_inr_low_band
    );
    Ok(())
}
