use std::fmt::Write as _;

use diner::model::{evaluate_psnr, train};
use diner::signal::attribute_rank;
use diner::Real;
use log::info;
use serde::Serialize;

use super::diner_model;
use crate::config::{ExperimentConfig, ModelKind, SweepSection};
use crate::error::{CliError, Result};
use crate::input::load_single;
use crate::output;

pub const REPORT_FILE: &str = "sweep.csv";

/// Outcome of a width sweep judged against the attribute rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepVerdict {
    pub attribute_rank: usize,
    pub widths: Vec<usize>,
    pub final_psnr_db: Vec<f64>,
    /// Smallest width within `spread_db` of the best PSNR.
    pub plateau_onset: usize,
    /// Smallest PSNR gain over consecutive widths up to the rank.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_gain_below_rank_db: Option<f64>,
    /// PSNR range over widths from the rank to rank + 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spread_from_rank_db: Option<f64>,
    pub non_decreasing_below_rank: bool,
    pub gains_below_rank: bool,
    pub flat_from_rank: bool,
    pub plateau_at_rank: bool,
}

impl SweepVerdict {
    pub fn passed(&self) -> bool {
        self.non_decreasing_below_rank && self.gains_below_rank && self.flat_from_rank
    }
}

/// Judges `(width, psnr)` pairs; widths need not be contiguous.
pub fn judge(rank: usize, results: &[(usize, f64)], s: &SweepSection) -> SweepVerdict {
    let mut sorted = results.to_vec();
    sorted.sort_by_key(|r| r.0);
    let psnr_at = |l: usize| sorted.iter().find(|r| r.0 == l).map(|r| r.1);

    let gains: Vec<f64> = (1..rank)
        .filter_map(|l| Some(psnr_at(l + 1)? - psnr_at(l)?))
        .collect();
    let min_gain = gains.iter().cloned().reduce(f64::min);
    let upper: Vec<f64> = (rank..=rank + 2).filter_map(psnr_at).collect();
    let spread = (!upper.is_empty()).then(|| {
        upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - upper.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    let best = sorted.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let plateau_onset = sorted.iter().find(|r| r.1 >= best - s.spread_db).map_or(0, |r| r.0);

    SweepVerdict {
        attribute_rank: rank,
        widths: sorted.iter().map(|r| r.0).collect(),
        final_psnr_db: sorted.iter().map(|r| r.1).collect(),
        plateau_onset,
        min_gain_below_rank_db: min_gain,
        spread_from_rank_db: spread,
        non_decreasing_below_rank: gains.iter().all(|&g| g >= -s.noise_db),
        gains_below_rank: gains.iter().all(|&g| g >= s.gain_db),
        flat_from_rank: spread.is_none_or(|d| d <= s.spread_db),
        plateau_at_rank: plateau_onset == rank,
    }
}

pub fn run<T: Real>(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.model.kind != ModelKind::Diner {
        return Err(CliError::Config("width-sweep needs model.kind = \"diner\"".into()));
    }
    let signal = load_single(cfg)?;
    let rank = attribute_rank(&signal, cfg.sweep.rank_tol)?;
    let widths = if cfg.sweep.widths.is_empty() {
        (1..=signal.d_out() + 2).collect()
    } else {
        cfg.sweep.widths.clone()
    };
    let tc = cfg.train_config();
    let mut results = Vec::with_capacity(widths.len());
    for &l in &widths {
        let mut model = diner_model::<T>(cfg, signal.len(), l, signal.d_out())?;
        train(&mut model, &signal, &tc)?;
        let psnr = evaluate_psnr(&model, &signal)?;
        info!("width {l}: final PSNR {psnr:.3} dB");
        results.push((l, psnr));
    }
    let mut csv = String::from("width,final_psnr_db\n");
    for (l, p) in &results {
        let _ = writeln!(csv, "{l},{p}");
    }
    output::write(&cfg.out_dir.join(REPORT_FILE), csv)?;
    let verdict = judge(rank, &results, &cfg.sweep);
    output::write_summary(cfg, &verdict)?;
    println!(
        "width-sweep: rank {rank}, plateau onset {}, verdict {}",
        verdict.plateau_onset,
        if verdict.passed() { "consistent with rank rule" } else { "inconsistent with rank rule" }
    );
    Ok(())
}
