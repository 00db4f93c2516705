use std::f64::consts::PI;

use diner::lensless::{amplitude_psnr, load_measurements, save_measurements, solve_phase, synthetic_setup, Complex64, ComplexField};
use diner::model::{checkpoint::save_checkpoint, AnyModel};
use diner::{BaselineModel, GridIndexer, GridSignal, Real};
use log::info;
use serde::Serialize;

use super::diner_model;
use super::fit::CHECKPOINT_FILE;
use crate::config::{ExperimentConfig, ModelKind};
use crate::error::{CliError, Result};
use crate::output::{self, METRICS_FILE};

pub const MEASUREMENT_DIR: &str = "measurements";

#[derive(Serialize)]
struct LenslessSummary {
    propagation: &'static str,
    planes: usize,
    distances: Vec<f64>,
    final_measurement_psnr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude_psnr_db: Option<f64>,
}

fn plane_image(field: &ComplexField, f: impl Fn(Complex64) -> f64) -> Result<GridSignal> {
    let values = field.values().iter().map(|&v| f(v).clamp(0.0, 1.0)).collect();
    Ok(GridSignal::image(field.height(), field.width(), 1, values)?)
}

pub fn run<T: Real>(cfg: &ExperimentConfig) -> Result<()> {
    let l = &cfg.lensless;
    let (truth, set) = match &l.measurements {
        Some(dir) => (None, load_measurements(dir).map_err(|e| CliError::data(dir.display(), e))?),
        None => {
            let seed = l.object_seed.unwrap_or(cfg.seed);
            let (object, set) = synthetic_setup(l.height, l.width, l.pitch, l.wavelength, &l.distances, l.illumination, seed)?;
            save_measurements(&set, cfg.out_dir.join(MEASUREMENT_DIR))?;
            (Some(object), set)
        }
    };
    let (h, w) = (set.height(), set.width());
    let mut model: AnyModel<T> = match cfg.model.kind {
        ModelKind::Diner => AnyModel::Diner(diner_model(cfg, h * w, cfg.model.table_width.unwrap_or(2), 2)?),
        ModelKind::Baseline => AnyModel::Baseline(BaselineModel::new(
            GridIndexer::new(vec![h, w])?,
            2,
            &cfg.model.backbone_config(),
            cfg.seed,
        )?),
    };
    info!("phase retrieval on {h}x{w} from {} planes", set.distances.len());
    let (recon, log) = solve_phase(&set, &mut model, &cfg.train_config(), l.parameterization.into())?;

    let dir = &cfg.out_dir;
    output::write(&dir.join(METRICS_FILE), log.to_csv())?;
    save_checkpoint(&model, &cfg.to_toml(), dir.join(CHECKPOINT_FILE))?;
    output::save_signal(dir, "amplitude", &plane_image(&recon, |v| v.norm())?)?;
    output::save_signal(dir, "phase", &plane_image(&recon, |v| (v.arg() + PI) / (2.0 * PI))?)?;
    let amp = truth.as_ref().map(|t| amplitude_psnr(&recon, t)).transpose()?;
    let final_psnr = log.last().map_or(f64::NAN, |r| r.psnr_db);
    output::write_summary(
        cfg,
        &LenslessSummary {
            propagation: "angular-spectrum",
            planes: set.distances.len(),
            distances: set.distances.clone(),
            final_measurement_psnr_db: final_psnr,
            amplitude_psnr_db: amp,
        },
    )?;
    match amp {
        Some(a) => println!("lensless: measurement PSNR {final_psnr:.2} dB, amplitude PSNR {a:.2} dB"),
        None => println!("lensless: measurement PSNR {final_psnr:.2} dB"),
    }
    Ok(())
}
