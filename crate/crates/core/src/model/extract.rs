use super::{CoordinateModel, DinerModel};
use crate::error::{DinerError, Result};
use crate::hash::GridIndexer;
use crate::math::{DenseMatrix, Real};
use crate::signal::GridSignal;

/// Evaluates the backbone on an even mesh over the bounding box of the
/// table's mapped coordinates. Axis `k` of the result spans column `k`'s
/// `[min, max]` inclusively; a degenerate column collapses to one sample.
/// Outputs are clamped to `[0, 1]`.
pub fn extract_learned_inr<T: Real>(model: &DinerModel<T>, resolution: &[usize]) -> Result<GridSignal> {
    let width = model.width();
    if !(1..=3).contains(&width) {
        return Err(DinerError::Validation(format!(
            "learned-INR export supports table widths 1 to 3, got {width}"
        )));
    }
    if resolution.len() != width {
        return Err(DinerError::dims(
            "extract_learned_inr",
            format!("table width {width}"),
            format!("{} resolution entries", resolution.len()),
        ));
    }
    if let Some(r) = resolution.iter().find(|&&r| r < 2) {
        return Err(DinerError::Validation(format!("mesh resolution must be at least 2, got {r}")));
    }

    let bounds = model.table().column_bounds();
    let mut dims = resolution.to_vec();
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if lo == hi {
            log::warn!("mapped coordinate {k} is constant ({lo}); collapsing that axis to one sample");
            dims[k] = 1;
        }
    }
    let axes: Vec<Vec<T>> = bounds
        .iter()
        .zip(&dims)
        .map(|(&(lo, hi), &n)| {
            (0..n)
                .map(|j| match j {
                    0 => lo,
                    j if j == n - 1 => hi,
                    j => lo + (hi - lo) * T::of(j as f64 / (n - 1) as f64),
                })
                .collect()
        })
        .collect();

    let grid = GridIndexer::new(dims)?;
    let mut out = DenseMatrix::zeros(model.d_out(), grid.len());
    let all: Vec<usize> = (0..grid.len()).collect();
    for chunk in all.chunks(1 << 14) {
        let mut pts = DenseMatrix::zeros(width, chunk.len());
        for (c, &i) in chunk.iter().enumerate() {
            for (k, &j) in grid.unflatten(i)?.iter().enumerate() {
                pts.set(k, c, axes[k][j]);
            }
        }
        let pred = model.backbone().predict(&pts)?;
        for (c, &i) in chunk.iter().enumerate() {
            for r in 0..pred.rows() {
                out.set(r, i, pred.get(r, c));
            }
        }
    }
    if !out.all_finite() {
        return Err(DinerError::Numeric {
            context: "learned-INR mesh prediction".into(),
        });
    }
    Ok(GridSignal::from_columns(grid, &out)?.clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::HashTable;
    use crate::math::Activation;
    use crate::model::{Backbone, Layer, PositionalEncoding};

    fn identity_model(len: usize, width: usize, entries: Vec<f64>) -> DinerModel<f64> {
        let layer = Layer::new(DenseMatrix::identity(width), DenseMatrix::zeros(width, 1), Activation::Identity).unwrap();
        let bb = Backbone::from_layers(PositionalEncoding::identity(), width, vec![layer]).unwrap();
        DinerModel::from_parts(HashTable::from_entries(len, width, entries).unwrap(), bb).unwrap()
    }

    #[test]
    fn segment_endpoints_are_reproduced() {
        let m = identity_model(3, 1, vec![0.2, 0.9, 0.5]);
        let s = extract_learned_inr(&m, &[5]).unwrap();
        assert_eq!(s.dims(), &[5]);
        assert_eq!(s.attribute(0), &[0.2]);
        assert_eq!(s.attribute(4), &[0.9]);
        assert!((s.attribute(2)[0] - 0.55).abs() < 1e-15);
    }

    #[test]
    fn mesh_is_row_major_and_clamped() {
        let m = identity_model(2, 2, vec![-1.0, 0.0, 2.0, 1.0]);
        let s = extract_learned_inr(&m, &[4, 3]).unwrap();
        assert_eq!(s.dims(), &[4, 3]);
        assert_eq!(s.attribute(0), &[0.0, 0.0]);
        assert_eq!(s.attribute(2), &[0.0, 1.0]);
        assert_eq!(s.attribute(11), &[1.0, 1.0]);
        assert_eq!(s.attribute(3)[1], 0.0);
    }

    #[test]
    fn degenerate_axis_collapses() {
        let m = identity_model(3, 2, vec![0.1, 0.4, 0.5, 0.4, 0.3, 0.4]);
        let s = extract_learned_inr(&m, &[8, 8]).unwrap();
        assert_eq!(s.dims(), &[8, 1]);
        assert!(s.attributes().chunks(2).all(|a| a[1] == 0.4));
    }

    #[test]
    fn invalid_requests() {
        let m = identity_model(2, 2, vec![0.0, 0.0, 1.0, 1.0]);
        assert!(extract_learned_inr(&m, &[4]).is_err());
        assert!(extract_learned_inr(&m, &[1, 4]).is_err());
        let wide = identity_model(1, 4, vec![0.0; 4]);
        assert!(extract_learned_inr(&wide, &[2, 2, 2, 2]).is_err());
    }
}
