use diner::model::{checkpoint::save_checkpoint, evaluate_psnr, extract_learned_inr, predict_signal, train, AnyModel};
use diner::{CoordinateModel, Real};
use log::info;
use serde::Serialize;

use super::{build_model, inr_resolution};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::input::load_single;
use crate::output::{self, METRICS_FILE};

pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Serialize)]
struct FitSummary {
    final_psnr_db: f64,
    final_loss: f64,
    epochs: usize,
    parameters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    table_width: Option<usize>,
    reconstruction: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    learned_inr: Option<String>,
}

pub fn run<T: Real>(cfg: &ExperimentConfig) -> Result<()> {
    let signal = load_single(cfg)?;
    let mut model = build_model::<T>(cfg, &signal)?;
    info!(
        "fitting {:?} x {} with {} backbone parameters",
        signal.dims(),
        signal.d_out(),
        model.backbone().parameter_count()
    );
    let log = train(&mut model, &signal, &cfg.train_config())?;
    let dir = &cfg.out_dir;
    output::write(&dir.join(METRICS_FILE), log.to_csv())?;
    save_checkpoint(&model, &cfg.to_toml(), dir.join(CHECKPOINT_FILE))?;

    let recon = predict_signal(&model, signal.indexer())?.clamped();
    let recon_path = output::save_signal(dir, "reconstruction", &recon)?;
    let (table_width, inr_path) = match &model {
        AnyModel::Diner(m) if m.width() <= 3 => {
            let inr = extract_learned_inr(m, &inr_resolution(&signal, m.width()))?;
            (Some(m.width()), Some(output::save_signal(dir, "learned_inr", &inr)?))
        }
        AnyModel::Diner(m) => (Some(m.width()), None),
        AnyModel::Baseline(_) => (None, None),
    };
    let psnr = evaluate_psnr(&model, &signal)?;
    let file_name = |p: &std::path::Path| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    output::write_summary(
        cfg,
        &FitSummary {
            final_psnr_db: psnr,
            final_loss: log.last().map_or(f64::NAN, |r| r.loss),
            epochs: cfg.train.epochs,
            parameters: model.backbone().parameter_count(),
            table_width,
            reconstruction: file_name(&recon_path),
            learned_inr: inr_path.as_deref().map(file_name),
        },
    )?;
    println!("fit: final PSNR {psnr:.2} dB after {} epochs", cfg.train.epochs);
    Ok(())
}
