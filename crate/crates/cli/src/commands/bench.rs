use std::fmt::Write as _;
use std::time::Instant;

use diner::model::train;
use diner::rng::{substream, Stream};
use diner::signal::synth;
use diner::{BaselineModel, DenseMatrix, HashTable, Real};
use log::info;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use super::diner_model;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output;

pub const REPORT_FILE: &str = "bench.csv";

#[derive(Serialize)]
struct BenchSummary {
    epochs: usize,
    table_width: usize,
    diner_seconds: f64,
    backbone_seconds: f64,
    /// DINER over backbone-only training time; 1 by definition for zero epochs.
    train_ratio: f64,
    batch: usize,
    lengths: Vec<usize>,
    scatter_update_seconds: Vec<f64>,
    /// Slowest over fastest scatter-and-update time across lengths.
    scatter_ratio: f64,
}

fn seconds(f: impl FnOnce() -> Result<()>) -> Result<f64> {
    let t = Instant::now();
    f()?;
    Ok(t.elapsed().as_secs_f64())
}

/// Fastest single scatter-and-update step on a table of `len` rows.
fn scatter_update_time<T: Real>(len: usize, width: usize, batch: usize, repeats: usize, seed: u64) -> Result<f64> {
    let mut table = HashTable::<T>::zeros(len, width)?;
    let mut rng = substream(seed, Stream::Shuffle);
    let batch = batch.min(len);
    let indices = sample(&mut rng, len, batch).into_vec();
    let grad = DenseMatrix::from_fn(width, batch, |_, _| T::of(rng.gen_range(-1e-3..1e-3)));
    let mut best = f64::INFINITY;
    for _ in 0..repeats + 1 {
        let t = seconds(|| {
            let g = table.scatter_grad(&indices, &grad)?;
            table.apply_sparse(&g)?;
            Ok(())
        })?;
        best = best.min(t);
    }
    Ok(best)
}

pub fn run<T: Real>(cfg: &ExperimentConfig) -> Result<()> {
    let b = &cfg.bench;
    let image = synth::test_image(b.height, b.width, 3, cfg.seed)?;
    let width = cfg.model.table_width.unwrap_or(2);
    let mut tc = cfg.train_config();
    tc.record_time = false;
    tc.log_every = tc.epochs.max(1);

    let (mut diner_best, mut base_best) = (f64::INFINITY, f64::INFINITY);
    for round in 0..b.rounds {
        let mut d = diner_model::<T>(cfg, image.len(), width, image.d_out())?;
        let td = seconds(|| train(&mut d, &image, &tc).map(|_| ()).map_err(Into::into))?;
        let mut m = BaselineModel::<T>::new(image.indexer().clone(), image.d_out(), &cfg.model.backbone_config(), cfg.seed)?;
        let tb = seconds(|| train(&mut m, &image, &tc).map(|_| ()).map_err(Into::into))?;
        info!("round {round}: table model {td:.3} s, backbone only {tb:.3} s");
        diner_best = diner_best.min(td);
        base_best = base_best.min(tb);
    }
    let train_ratio = if tc.epochs == 0 { 1.0 } else { diner_best / base_best };

    let mut scatter = Vec::with_capacity(b.lengths.len());
    for &len in &b.lengths {
        let t = scatter_update_time::<T>(len, width, b.batch, b.repeats, cfg.seed)?;
        info!("table length {len}: scatter and update {:.3} us", t * 1e6);
        scatter.push(t);
    }
    let fastest = scatter.iter().cloned().fold(f64::INFINITY, f64::min);
    let slowest = scatter.iter().cloned().fold(0.0, f64::max);
    let scatter_ratio = slowest / fastest;

    let mut csv = String::from("case,n,seconds\n");
    let _ = writeln!(csv, "train_diner,{},{diner_best}", image.len());
    let _ = writeln!(csv, "train_backbone,{},{base_best}", image.len());
    for (len, t) in b.lengths.iter().zip(&scatter) {
        let _ = writeln!(csv, "scatter_update,{len},{t}");
    }
    output::write(&cfg.out_dir.join(REPORT_FILE), csv)?;
    output::write_summary(
        cfg,
        &BenchSummary {
            epochs: tc.epochs,
            table_width: width,
            diner_seconds: diner_best,
            backbone_seconds: base_best,
            train_ratio,
            batch: b.batch,
            lengths: b.lengths.clone(),
            scatter_update_seconds: scatter,
            scatter_ratio,
        },
    )?;
    println!("bench-hash: training ratio {train_ratio:.3}, scatter ratio {scatter_ratio:.3}");
    Ok(())
}
