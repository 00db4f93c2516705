//! Hash-table models, coordinate baselines and their training loop.

mod backbone;
pub mod checkpoint;
mod encoding;
mod extract;
mod train;

pub use backbone::{Backbone, BackboneConfig, BackboneGrads, BackboneKind, ForwardTrace, Layer, LayerCache};
pub use encoding::PositionalEncoding;
pub use extract::extract_learned_inr;
pub use train::{
    evaluate_psnr, predict_signal, train, train_with_objective, Evaluation, FitObjective, MetricsLog, MetricsRow,
    Objective, TrainConfig,
};

use crate::error::{DinerError, Result};
use crate::hash::{GridIndexer, HashInit, HashTable};
use crate::math::{AdamParams, DenseMatrix, Real};
use crate::rng::{substream, Stream};

/// A network evaluated at grid elements addressed by flattened index.
pub trait CoordinateModel<T: Real> {
    /// Number of grid elements the model is bound to.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn d_out(&self) -> usize {
        self.backbone().output_width()
    }

    fn backbone(&self) -> &Backbone<T>;

    fn backbone_mut(&mut self) -> &mut Backbone<T>;

    /// Backbone inputs (before any positional encoding) for a batch, `width x batch`.
    fn inputs(&self, indices: &[usize]) -> Result<DenseMatrix<T>>;

    /// Whether the input gradient is consumed by [`CoordinateModel::apply_input_grad`].
    fn learns_inputs(&self) -> bool;

    fn apply_input_grad(&mut self, indices: &[usize], grad: &DenseMatrix<T>) -> Result<()>;

    /// Fresh optimizer state for a training run.
    fn reset_optimizers(&mut self, net: AdamParams, inputs: AdamParams);

    fn predict(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        self.backbone().predict(&self.inputs(indices)?)
    }
}

/// Hash table feeding a backbone: element `i` is evaluated at table row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DinerModel<T = f64> {
    table: HashTable<T>,
    backbone: Backbone<T>,
    frozen_table: bool,
}

impl<T: Real> DinerModel<T> {
    /// Table of `len x width` and a freshly initialized backbone.
    pub fn new(
        len: usize,
        width: usize,
        d_out: usize,
        backbone: &BackboneConfig,
        init: HashInit,
        seed: u64,
    ) -> Result<Self> {
        let table = HashTable::init(len, width, init, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        let backbone = Backbone::new(backbone, width, d_out, &mut substream(seed, Stream::Init))?;
        Self::from_parts(table, backbone)
    }

    pub fn from_parts(table: HashTable<T>, backbone: Backbone<T>) -> Result<Self> {
        if backbone.input_width() != table.width() {
            return Err(DinerError::dims(
                "DinerModel",
                format!("table width {}", table.width()),
                format!("backbone input {}", backbone.input_width()),
            ));
        }
        Ok(Self {
            table,
            backbone,
            frozen_table: false,
        })
    }

    pub fn table(&self) -> &HashTable<T> {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut HashTable<T> {
        &mut self.table
    }

    pub fn width(&self) -> usize {
        self.table.width()
    }

    /// Keeps the table fixed during training.
    pub fn set_table_frozen(&mut self, frozen: bool) {
        self.frozen_table = frozen;
    }

    pub fn table_frozen(&self) -> bool {
        self.frozen_table
    }

    /// Same function on a wider table: added columns and their first-layer
    /// weights are zero, so every prediction is unchanged.
    pub fn embed_width(&self, extra: usize) -> Self {
        let mut out = self.clone();
        out.table.widen(extra);
        out.backbone.embed_inputs(extra);
        out
    }

    pub fn into_parts(self) -> (HashTable<T>, Backbone<T>) {
        (self.table, self.backbone)
    }
}

impl<T: Real> CoordinateModel<T> for DinerModel<T> {
    fn len(&self) -> usize {
        self.table.len()
    }

    fn backbone(&self) -> &Backbone<T> {
        &self.backbone
    }

    fn backbone_mut(&mut self) -> &mut Backbone<T> {
        &mut self.backbone
    }

    fn inputs(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        self.table.lookup(indices)
    }

    fn learns_inputs(&self) -> bool {
        !self.frozen_table
    }

    fn apply_input_grad(&mut self, indices: &[usize], grad: &DenseMatrix<T>) -> Result<()> {
        if self.frozen_table {
            return Ok(());
        }
        let sparse = self.table.scatter_grad(indices, grad)?;
        self.table.apply_sparse(&sparse)
    }

    fn reset_optimizers(&mut self, net: AdamParams, inputs: AdamParams) {
        self.backbone.set_optimizer(net);
        self.table.reset_optimizer(inputs);
    }
}

/// Backbone evaluated directly at grid coordinates normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel<T = f64> {
    indexer: GridIndexer,
    backbone: Backbone<T>,
}

impl<T: Real> BaselineModel<T> {
    pub fn new(indexer: GridIndexer, d_out: usize, backbone: &BackboneConfig, seed: u64) -> Result<Self> {
        let bb = Backbone::new(backbone, indexer.ndim(), d_out, &mut substream(seed, Stream::Init))?;
        Self::from_parts(indexer, bb)
    }

    pub fn from_parts(indexer: GridIndexer, backbone: Backbone<T>) -> Result<Self> {
        if backbone.input_width() != indexer.ndim() {
            return Err(DinerError::dims(
                "BaselineModel",
                format!("{} grid axes", indexer.ndim()),
                format!("backbone input {}", backbone.input_width()),
            ));
        }
        Ok(Self { indexer, backbone })
    }

    pub fn indexer(&self) -> &GridIndexer {
        &self.indexer
    }
}

impl<T: Real> CoordinateModel<T> for BaselineModel<T> {
    fn len(&self) -> usize {
        self.indexer.len()
    }

    fn backbone(&self) -> &Backbone<T> {
        &self.backbone
    }

    fn backbone_mut(&mut self) -> &mut Backbone<T> {
        &mut self.backbone
    }

    fn inputs(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        self.indexer.normalized_coords(indices)
    }

    fn learns_inputs(&self) -> bool {
        false
    }

    fn apply_input_grad(&mut self, _indices: &[usize], _grad: &DenseMatrix<T>) -> Result<()> {
        Ok(())
    }

    fn reset_optimizers(&mut self, net: AdamParams, _inputs: AdamParams) {
        self.backbone.set_optimizer(net);
    }
}

/// Either kind of model, e.g. as restored from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel<T = f64> {
    Diner(DinerModel<T>),
    Baseline(BaselineModel<T>),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            AnyModel::Diner($m) => $e,
            AnyModel::Baseline($m) => $e,
        }
    };
}

impl<T: Real> CoordinateModel<T> for AnyModel<T> {
    fn len(&self) -> usize {
        delegate!(self, m => m.len())
    }

    fn backbone(&self) -> &Backbone<T> {
        delegate!(self, m => m.backbone())
    }

    fn backbone_mut(&mut self) -> &mut Backbone<T> {
        delegate!(self, m => m.backbone_mut())
    }

    fn inputs(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        delegate!(self, m => m.inputs(indices))
    }

    fn learns_inputs(&self) -> bool {
        delegate!(self, m => m.learns_inputs())
    }

    fn apply_input_grad(&mut self, indices: &[usize], grad: &DenseMatrix<T>) -> Result<()> {
        delegate!(self, m => m.apply_input_grad(indices, grad))
    }

    fn reset_optimizers(&mut self, net: AdamParams, inputs: AdamParams) {
        delegate!(self, m => m.reset_optimizers(net, inputs))
    }
}
