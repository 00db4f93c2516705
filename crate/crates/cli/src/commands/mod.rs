//! One module per subcommand; each is generic over the floating point type.

mod bench;
mod disorder;
mod fit;
mod lensless;
mod spectrum;
mod sweep;

use diner::model::AnyModel;
use diner::signal::attribute_rank;
use diner::{BaselineModel, DinerModel, GridSignal, Real};

use crate::config::{ExperimentConfig, ModelKind, Precision, Task};
use crate::error::Result;
use crate::output;

/// Validates, writes the configuration echo, and runs `task`.
pub fn execute(task: Task, cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate(task)?;
    output::create_dir(&cfg.out_dir)?;
    output::write_run_echo(cfg, task)?;
    match cfg.precision {
        Precision::F32 => dispatch::<f32>(task, cfg),
        Precision::F64 => dispatch::<f64>(task, cfg),
    }
}

fn dispatch<T: Real>(task: Task, cfg: &ExperimentConfig) -> Result<()> {
    match task {
        Task::Fit => fit::run::<T>(cfg),
        Task::DisorderTest => disorder::run::<T>(cfg),
        Task::WidthSweep => sweep::run::<T>(cfg),
        Task::Spectrum => spectrum::run::<T>(cfg),
        Task::Lensless => lensless::run::<T>(cfg),
        Task::BenchHash => bench::run::<T>(cfg),
    }
}

/// Configured table width, or the signal's attribute rank.
fn table_width(cfg: &ExperimentConfig, signal: &GridSignal) -> Result<usize> {
    match cfg.model.table_width {
        Some(l) => Ok(l),
        None => Ok(attribute_rank(signal, cfg.sweep.rank_tol)?.max(1)),
    }
}

fn diner_model<T: Real>(cfg: &ExperimentConfig, len: usize, width: usize, d_out: usize) -> Result<DinerModel<T>> {
    Ok(DinerModel::new(
        len,
        width,
        d_out,
        &cfg.model.backbone_config(),
        cfg.model.hash_init(),
        cfg.seed,
    )?)
}

fn build_model<T: Real>(cfg: &ExperimentConfig, signal: &GridSignal) -> Result<AnyModel<T>> {
    Ok(match cfg.model.kind {
        ModelKind::Diner => {
            let l = table_width(cfg, signal)?;
            AnyModel::Diner(diner_model(cfg, signal.len(), l, signal.d_out())?)
        }
        ModelKind::Baseline => AnyModel::Baseline(BaselineModel::new(
            signal.indexer().clone(),
            signal.d_out(),
            &cfg.model.backbone_config(),
            cfg.seed,
        )?),
    })
}

/// Mesh for the learned INR: the signal's own extents when it has `width`
/// axes, else 64 samples per axis.
fn inr_resolution(signal: &GridSignal, width: usize) -> Vec<usize> {
    if signal.dims().len() == width {
        signal.dims().iter().map(|&d| d.max(2)).collect()
    } else {
        vec![64; width]
    }
}
