//! Dense linear algebra, activations, loss and optimizer used by every
//! training path in the crate.
//!
//! All reductions run in a fixed sequential order so that results are
//! reproducible bit-for-bit. Matrices store one sample per column.

mod activation;
mod adam;
mod loss;
mod matrix;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

pub use activation::Activation;
pub use adam::{AdamParams, AdamState};
pub(crate) use adam::adam_update;
pub use loss::mse_loss;
pub use matrix::{linear_backward, linear_forward, DenseMatrix, LinearGrads};

/// Floating point type a model can be trained in.
pub trait Real:
    Float + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Width in bytes of the little-endian encoding.
    const BYTES: u8;

    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
    /// IEEE total order.
    fn total_order(&self, other: &Self) -> std::cmp::Ordering;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Real for f64 {
    const BYTES: u8 = 8;

    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    fn total_order(&self, other: &Self) -> std::cmp::Ordering {
        self.total_cmp(other)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(b)
    }
}

impl Real for f32 {
    const BYTES: u8 = 4;

    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn total_order(&self, other: &Self) -> std::cmp::Ordering {
        self.total_cmp(other)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 4];
        b.copy_from_slice(&bytes[..4]);
        f32::from_le_bytes(b)
    }
}
