//! Gradient-descent fitting of coordinate models.
//!
//! Full-batch steps evaluate columns in a canonical content order: columns
//! are sorted by the backbone input and then by the target. Two signals that
//! are permutations of each other therefore present the exact same sequence
//! of floating point operations to the network, which makes training
//! bit-for-bit independent of element arrangement.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::CoordinateModel;
use crate::error::{DinerError, Result};
use crate::hash::GridIndexer;
use crate::math::{mse_loss, AdamParams, DenseMatrix, Real};
use crate::rng::{substream, Stream};
use crate::signal::{psnr, psnr_from_mse, GridSignal};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Elements per step; 0 means the whole signal.
    pub batch_size: usize,
    pub seed: u64,
    pub lr_net: f64,
    pub lr_hash: f64,
    /// A log row is written every `log_every` epochs and after the last one.
    pub log_every: usize,
    /// Record wall-clock time in the log; when off the column is 0 so reruns are byte-identical.
    pub record_time: bool,
    /// Sort full-batch columns by content before each step.
    pub canonical_order: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 0,
            seed: 0,
            lr_net: 1e-4,
            lr_hash: 1e-4,
            log_every: 1,
            record_time: true,
            canonical_order: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.batch_size > len {
            return Err(DinerError::Validation(format!(
                "batch size {} exceeds signal length {len}",
                self.batch_size
            )));
        }
        if self.log_every == 0 {
            return Err(DinerError::Validation("log cadence must be at least 1".into()));
        }
        AdamParams::with_lr(self.lr_net).validate()?;
        AdamParams::with_lr(self.lr_hash).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub wall_ms: f64,
    pub loss: f64,
    pub psnr_db: f64,
}

/// Per-epoch training metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

impl MetricsLog {
    pub const HEADER: &'static str = "epoch,wall_ms,loss,psnr_db";

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// Values are written in shortest round-trip form, so parsing restores them exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.wall_ms, r.loss, r.psnr_db);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::HEADER) {
            return Err(DinerError::Validation(format!(
                "metrics CSV must start with `{}`",
                Self::HEADER
            )));
        }
        let bad = |n: usize, line: &str| DinerError::Validation(format!("malformed metrics row {n}: `{line}`"));
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(n + 1, line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n + 1, line));
            rows.push(MetricsRow {
                epoch: f[0].parse().map_err(|_| bad(n + 1, line))?,
                wall_ms: num(f[1])?,
                loss: num(f[2])?,
                psnr_db: num(f[3])?,
            });
        }
        Ok(Self { rows })
    }
}

/// Loss and its gradient with respect to the predictions of one batch.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub loss: T,
    pub grad: DenseMatrix<T>,
}

/// Differentiable objective over model predictions, e.g. a physical forward
/// process followed by a data term.
pub trait Objective<T: Real> {
    /// Number of elements the objective expects predictions for.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn d_out(&self) -> usize;

    /// `prediction` is `d_out x indices.len()`, column `c` belonging to `indices[c]`.
    fn evaluate(&mut self, indices: &[usize], prediction: &DenseMatrix<T>) -> Result<Evaluation<T>>;

    /// PSNR reported alongside a (mean) loss.
    fn psnr_db(&self, loss: f64) -> f64 {
        psnr_from_mse(loss)
    }

    /// Per-element data that, together with the model input, determines each
    /// column's contribution. Objectives that couple elements return `None`
    /// and are evaluated in index order.
    fn ordering_key(&self, _indices: &[usize]) -> Option<Result<DenseMatrix<T>>> {
        None
    }
}

/// Identity forward process: mean squared error against the signal.
#[derive(Debug, Clone)]
pub struct FitObjective<T = f64> {
    targets: DenseMatrix<T>,
}

impl<T: Real> FitObjective<T> {
    pub fn new(signal: &GridSignal) -> Result<Self> {
        if signal.is_empty() {
            return Err(DinerError::EmptySignal);
        }
        let all: Vec<usize> = (0..signal.len()).collect();
        Ok(Self {
            targets: signal.targets(&all)?,
        })
    }

    fn batch_targets(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.targets.cols()) {
            return Err(DinerError::Index {
                axis: 0,
                value: bad,
                extent: self.targets.cols(),
            });
        }
        Ok(self.targets.select_columns(indices))
    }
}

impl<T: Real> Objective<T> for FitObjective<T> {
    fn len(&self) -> usize {
        self.targets.cols()
    }

    fn d_out(&self) -> usize {
        self.targets.rows()
    }

    fn evaluate(&mut self, indices: &[usize], prediction: &DenseMatrix<T>) -> Result<Evaluation<T>> {
        let (loss, grad) = mse_loss(prediction, &self.batch_targets(indices)?)?;
        Ok(Evaluation { loss, grad })
    }

    fn ordering_key(&self, indices: &[usize]) -> Option<Result<DenseMatrix<T>>> {
        Some(self.batch_targets(indices))
    }
}

fn compare_columns<T: Real>(m: &DenseMatrix<T>, a: usize, b: usize) -> Ordering {
    for r in 0..m.rows() {
        match m.get(r, a).total_order(&m.get(r, b)) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

/// Column order sorting by `primary`, then `secondary`.
fn canonical_order<T: Real>(primary: &DenseMatrix<T>, secondary: &DenseMatrix<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..primary.cols()).collect();
    order.sort_by(|&a, &b| compare_columns(primary, a, b).then_with(|| compare_columns(secondary, a, b)));
    order
}

fn diverged(epoch: usize, e: DinerError) -> DinerError {
    match e {
        DinerError::Numeric { context } => DinerError::Divergence {
            epoch,
            detail: format!("non-finite update in {context}"),
        },
        e => e,
    }
}

fn step<T, M, O>(model: &mut M, objective: &mut O, batch: &[usize], cfg: &TrainConfig, epoch: usize) -> Result<f64>
where
    T: Real,
    M: CoordinateModel<T> + ?Sized,
    O: Objective<T> + ?Sized,
{
    let mut indices = batch.to_vec();
    let mut inputs = model.inputs(&indices)?;
    if cfg.canonical_order {
        if let Some(key) = objective.ordering_key(&indices) {
            let order = canonical_order(&inputs, &key?);
            if order.iter().enumerate().any(|(i, &o)| i != o) {
                indices = order.iter().map(|&c| indices[c]).collect();
                inputs = inputs.select_columns(&order);
            }
        }
    }

    let trace = model.backbone().forward(&inputs)?;
    if let Some(layer) = trace.first_non_finite_layer() {
        return Err(DinerError::Divergence {
            epoch,
            detail: format!("layer {layer} produced a non-finite activation"),
        });
    }
    let eval = objective.evaluate(&indices, trace.output())?;
    if !eval.loss.is_finite() {
        return Err(DinerError::Divergence {
            epoch,
            detail: "loss is not finite".into(),
        });
    }
    let grads = model.backbone().backward(&trace, &eval.grad, model.learns_inputs())?;
    model.backbone_mut().apply_grads(&grads).map_err(|e| diverged(epoch, e))?;
    if let Some(g) = &grads.input {
        model.apply_input_grad(&indices, g).map_err(|e| diverged(epoch, e))?;
    }
    Ok(eval.loss.as_f64())
}

/// Fits `model` to `signal` under mean squared error.
pub fn train<T: Real, M: CoordinateModel<T> + ?Sized>(
    model: &mut M,
    signal: &GridSignal,
    cfg: &TrainConfig,
) -> Result<MetricsLog> {
    if model.len() != signal.len() {
        return Err(DinerError::Binding {
            expected: model.len(),
            actual: signal.len(),
        });
    }
    let mut objective = FitObjective::new(signal)?;
    train_with_objective(model, &mut objective, cfg)
}

/// Minimizes an arbitrary objective over the model's predictions.
pub fn train_with_objective<T, M, O>(model: &mut M, objective: &mut O, cfg: &TrainConfig) -> Result<MetricsLog>
where
    T: Real,
    M: CoordinateModel<T> + ?Sized,
    O: Objective<T> + ?Sized,
{
    let n = model.len();
    if objective.len() != n {
        return Err(DinerError::Binding {
            expected: n,
            actual: objective.len(),
        });
    }
    if objective.d_out() != model.d_out() {
        return Err(DinerError::dims("train", format!("model d_out {}", model.d_out()), format!("objective d_out {}", objective.d_out())));
    }
    cfg.validate(n)?;
    if cfg.epochs == 0 {
        return Ok(MetricsLog::default());
    }
    model.reset_optimizers(AdamParams::with_lr(cfg.lr_net), AdamParams::with_lr(cfg.lr_hash));

    let batch = if cfg.batch_size == 0 { n } else { cfg.batch_size };
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(cfg.seed, Stream::Shuffle);
    let start = Instant::now();
    let mut log = MetricsLog::default();

    for epoch in 1..=cfg.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(batch) {
            weighted += step(model, objective, chunk, cfg, epoch)? * chunk.len() as f64;
        }
        let loss = weighted / n as f64;
        if epoch % cfg.log_every == 0 || epoch == cfg.epochs {
            let wall_ms = if cfg.record_time {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            log::debug!("epoch {epoch}: loss {loss:e}");
            log.rows.push(MetricsRow {
                epoch,
                wall_ms,
                loss,
                psnr_db: objective.psnr_db(loss),
            });
        }
    }
    Ok(log)
}

const PREDICT_CHUNK: usize = 1 << 14;

/// Unclamped predictions for every element of `indexer`, in index order.
pub fn predict_signal<T: Real, M: CoordinateModel<T> + ?Sized>(model: &M, indexer: &GridIndexer) -> Result<GridSignal> {
    if model.len() != indexer.len() {
        return Err(DinerError::Binding {
            expected: model.len(),
            actual: indexer.len(),
        });
    }
    let d = model.d_out();
    let mut attrs = Vec::with_capacity(indexer.len() * d);
    let all: Vec<usize> = (0..indexer.len()).collect();
    for chunk in all.chunks(PREDICT_CHUNK) {
        let out = model.predict(chunk)?;
        for c in 0..out.cols() {
            attrs.extend((0..d).map(|r| out.get(r, c).as_f64()));
        }
    }
    if attrs.iter().any(|v| !v.is_finite()) {
        return Err(DinerError::Numeric {
            context: "model prediction".into(),
        });
    }
    GridSignal::new(indexer.clone(), d, attrs)
}

/// PSNR of the clamped reconstruction against `signal`.
pub fn evaluate_psnr<T: Real, M: CoordinateModel<T> + ?Sized>(model: &M, signal: &GridSignal) -> Result<f64> {
    psnr(&predict_signal(model, signal.indexer())?.clamped(), signal)
}
