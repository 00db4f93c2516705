use std::fmt::Write as _;

use diner::model::{predict_signal, train, MetricsLog};
use diner::rng::{substream, Stream};
use diner::signal::{permute, psnr, sort_by_intensity};
use diner::{CoordinateModel, DinerModel, HashInit, Permutation, Real};
use log::{info, warn};
use serde::Serialize;

use super::{diner_model, table_width};
use crate::config::{ExperimentConfig, InitName, ModelKind};
use crate::error::{CliError, Result};
use crate::input::load_single;
use crate::output;

pub const REPORT_FILE: &str = "disorder.csv";

struct Run<T> {
    name: String,
    perm: Permutation,
    log: MetricsLog,
    model: DinerModel<T>,
    psnr: f64,
}

#[derive(Serialize)]
struct DisorderSummary {
    arrangements: Vec<String>,
    final_psnr_db: Vec<f64>,
    max_abs_delta_psnr_db: f64,
    loss_traces_identical: bool,
    backbones_identical: bool,
    tables_permuted: bool,
}

fn bits<T: Real>(values: &[T]) -> impl Iterator<Item = u64> + '_ {
    values.iter().map(|v| v.as_f64().to_bits())
}

/// First logged epoch whose loss differs bit-wise, if any.
fn first_divergence(a: &MetricsLog, b: &MetricsLog) -> Option<usize> {
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if ra.epoch != rb.epoch || ra.loss.to_bits() != rb.loss.to_bits() {
            return Some(ra.epoch.min(rb.epoch));
        }
    }
    match a.rows.len().cmp(&b.rows.len()) {
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Less => Some(b.rows[a.rows.len()].epoch),
        std::cmp::Ordering::Greater => Some(a.rows[b.rows.len()].epoch),
    }
}

fn same_backbone<T: Real>(a: &DinerModel<T>, b: &DinerModel<T>) -> bool {
    let (la, lb) = (a.backbone().layers(), b.backbone().layers());
    la.len() == lb.len()
        && la.iter().zip(lb).all(|(x, y)| {
            bits(x.weight.data()).eq(bits(y.weight.data())) && bits(x.bias.data()).eq(bits(y.bias.data()))
        })
}

pub fn run<T: Real>(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.model.kind != ModelKind::Diner {
        return Err(CliError::Config("disorder-test needs model.kind = \"diner\"".into()));
    }
    let signal = load_single(cfg)?;
    let mut tc = cfg.train_config();
    if tc.batch_size != 0 {
        warn!("disorder-test trains full batch; ignoring batch_size = {}", tc.batch_size);
        tc.batch_size = 0;
    }
    let mut cfg = cfg.clone();
    if cfg.model.init != InitName::Zeros {
        warn!("disorder-test initializes the table with zeros; ignoring init = {:?}", cfg.model.init);
        cfg.model.init = InitName::Zeros;
    }
    debug_assert_eq!(cfg.model.hash_init(), HashInit::Zeros);
    let width = table_width(&cfg, &signal)?;

    let n = signal.len();
    let mut arrangements = vec![("original".to_string(), Permutation::identity(n))];
    arrangements.push(("sorted".to_string(), sort_by_intensity(&signal)?.1));
    let mut rng = substream(cfg.seed, Stream::Permutation);
    for k in 1..=cfg.disorder.permutations {
        arrangements.push((format!("random_{k}"), Permutation::random(n, &mut rng)));
    }

    let mut runs = Vec::with_capacity(arrangements.len());
    for (name, perm) in arrangements {
        let arranged = permute(&signal, &perm)?;
        let mut model = diner_model::<T>(&cfg, n, width, signal.d_out())?;
        let log = train(&mut model, &arranged, &tc)?;
        // Score in the original order so the error sum runs in the same order for every arrangement.
        let restored = permute(&predict_signal(&model, arranged.indexer())?.clamped(), &perm.inverse())?;
        let score = psnr(&restored, &signal)?;
        info!("{name}: final PSNR {score:.4} dB");
        runs.push(Run {
            name,
            perm,
            log,
            model,
            psnr: score,
        });
    }

    let reference = &runs[0];
    let mut problems = Vec::new();
    let (mut traces, mut backbones, mut tables) = (true, true, true);
    for r in &runs[1..] {
        if let Some(epoch) = first_divergence(&reference.log, &r.log) {
            traces = false;
            problems.push(format!("{}: loss trace diverges from original at epoch {epoch}", r.name));
        }
        if !same_backbone(&reference.model, &r.model) {
            backbones = false;
            problems.push(format!("{}: final backbone differs from original", r.name));
        }
        let expected = r.perm.gather(reference.model.table().entries(), width);
        if !bits(&expected).eq(bits(r.model.table().entries())) {
            tables = false;
            problems.push(format!("{}: final table is not the permuted original table", r.name));
        }
    }

    let psnrs: Vec<f64> = runs.iter().map(|r| r.psnr).collect();
    let spread = psnrs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - psnrs.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if spread.is_nan() { 0.0 } else { spread };
    let mut csv = String::from("arrangement,final_loss,final_psnr_db\n");
    for r in &runs {
        let loss = r.log.last().map_or(f64::NAN, |row| row.loss);
        let _ = writeln!(csv, "{},{loss},{}", r.name, r.psnr);
    }
    output::write(&cfg.out_dir.join(REPORT_FILE), csv)?;
    output::write_summary(
        &cfg,
        &DisorderSummary {
            arrangements: runs.iter().map(|r| r.name.clone()).collect(),
            final_psnr_db: psnrs,
            max_abs_delta_psnr_db: spread,
            loss_traces_identical: traces,
            backbones_identical: backbones,
            tables_permuted: tables,
        },
    )?;
    println!("disorder-test: {} arrangements, max |dPSNR| = {spread} dB", runs.len());
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Disorder(problems.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use diner::model::MetricsRow;

    fn log(losses: &[f64]) -> MetricsLog {
        MetricsLog {
            rows: losses
                .iter()
                .enumerate()
                .map(|(i, &loss)| MetricsRow {
                    epoch: i + 1,
                    wall_ms: 0.0,
                    loss,
                    psnr_db: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn divergence_reports_first_differing_epoch() {
        assert_eq!(first_divergence(&log(&[1.0, 0.5]), &log(&[1.0, 0.5])), None);
        assert_eq!(first_divergence(&log(&[1.0, 0.5, 0.2]), &log(&[1.0, 0.5000001, 0.2])), Some(2));
        assert_eq!(first_divergence(&log(&[1.0]), &log(&[1.0, 0.5])), Some(2));
        assert_eq!(first_divergence(&log(&[0.0]), &log(&[-0.0])), Some(1));
    }
}
