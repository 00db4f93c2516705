use super::GridSignal;
use crate::error::{DinerError, Result};

/// Singular values (descending) of a row-major `rows x cols` matrix by
/// one-sided Jacobi rotations on its columns.
pub fn singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|c| (0..rows).map(|r| data[r * cols + c]).collect())
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = a.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = c * u - s * v;
                    *y = s * u + c * v;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = a.iter().map(|col| dot(col, col).sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Number of singular values of the `N x d_out` attribute matrix above
/// `tol * sigma_max`.
pub fn attribute_rank(signal: &GridSignal, tol: f64) -> Result<usize> {
    if signal.is_empty() {
        return Err(DinerError::EmptySignal);
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(DinerError::Validation(format!("rank tolerance must be positive, got {tol}")));
    }
    let sv = singular_values(signal.len(), signal.d_out(), signal.attributes());
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * max).count())
}
