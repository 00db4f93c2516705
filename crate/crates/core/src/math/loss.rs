use super::{DenseMatrix, Real};
use crate::error::{DinerError, Result};

/// Mean squared error over all entries and its gradient `2 (pred - target) / count`.
pub fn mse_loss<T: Real>(pred: &DenseMatrix<T>, target: &DenseMatrix<T>) -> Result<(T, DenseMatrix<T>)> {
    if pred.shape() != target.shape() {
        return Err(DinerError::dims("mse_loss", pred.shape_str(), target.shape_str()));
    }
    let count = pred.data().len();
    if count == 0 {
        return Ok((T::zero(), pred.clone()));
    }
    let n = T::of(count as f64);
    let two_over_n = T::of(2.0) / n;
    let mut sum = T::zero();
    let mut grad = Vec::with_capacity(count);
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        sum = sum + d * d;
        grad.push(two_over_n * d);
    }
    Ok((
        sum / n,
        DenseMatrix::from_vec_unchecked(pred.rows(), pred.cols(), grad),
    ))
}
