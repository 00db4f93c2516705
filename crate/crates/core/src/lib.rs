//! Disorder-invariant implicit neural representations.
//!
//! A learnable full-resolution hash table maps every grid element to a
//! low-dimensional coordinate, and a small coordinate network maps those
//! coordinates to attributes. Because the table is indexed per element, the
//! network sees the signal's attribute histogram rather than its arrangement.
//!
//! Modules:
//! - [`math`]: dense matrices, activations, MSE, Adam
//! - [`hash`]: grid indexing and the learnable table
//! - [`signal`]: grid signals, arrangements, rank, PSNR, image I/O
//! - [`model`]: backbones, hash/baseline models, training, learned-INR export
//! - [`spectrum`]: 2D DFT and radial band-energy ratios
//! - [`lensless`]: multi-height lensless forward model and phase retrieval

pub mod error;
pub mod hash;
pub mod lensless;
pub mod math;
pub mod model;
pub mod rng;
pub mod signal;
pub mod spectrum;

pub use error::{DinerError, Result};
pub use hash::{GridIndexer, HashInit, HashTable, SparseGrad};
pub use math::{Activation, AdamParams, AdamState, DenseMatrix, Real};
pub use model::{
    Backbone, BackboneConfig, BackboneKind, BaselineModel, CoordinateModel, DinerModel,
    MetricsLog, PositionalEncoding, TrainConfig,
};
pub use signal::{GridSignal, Permutation};
