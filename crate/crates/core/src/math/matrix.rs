use std::fmt;

use super::Real;
use crate::error::{DinerError, Result};

/// Row-major dense matrix. Batches are stored with one sample per column.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DinerError::dims(
                "DenseMatrix::new",
                format!("{rows}x{cols}"),
                format!("{} values", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(DinerError::Numeric {
                context: format!("matrix entry ({}, {})", pos / cols.max(1), pos % cols.max(1)),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn column_vector(values: &[T]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self.data[r * self.cols + c]);
            }
        }
        Self::from_vec_unchecked(self.cols, self.rows, out)
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            let src = self.row(r);
            let dst = out.row_mut(r);
            for (d, &c) in dst.iter_mut().zip(cols) {
                *d = src[c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> DenseMatrix<U> {
        DenseMatrix::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        )
    }

    pub(crate) fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            writeln!(f, "  {:?}", &row[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

/// Output columns handled per packed panel.
const PANEL: usize = 8;
/// Output rows sharing one pass over a panel.
const ROWS: usize = 2;

/// `A B` for row-major `A` (`m x inner`) and `B` (`inner x n`).
///
/// Every output entry is accumulated from zero over the inner index in
/// increasing order, independent of `m`, `n` and the tiling, so a column gives
/// the same bits whether it is computed alone or inside a batch.
fn ordered_product<T: Real>(a: &[T], m: usize, inner: usize, b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    let mut panel = vec![T::zero(); inner * PANEL];
    for c0 in (0..n).step_by(PANEL) {
        let width = PANEL.min(n - c0);
        // Pack the column strip contiguously so the inner loop streams it.
        for j in 0..inner {
            panel[j * PANEL..j * PANEL + width].copy_from_slice(&b[j * n + c0..j * n + c0 + width]);
        }
        let mut i0 = 0;
        while i0 + ROWS <= m {
            let acc = tile::<T, ROWS>(a, inner, i0, &panel);
            store(&mut out, n, i0, c0, width, &acc);
            i0 += ROWS;
        }
        for i in i0..m {
            let acc = tile::<T, 1>(a, inner, i, &panel);
            store(&mut out, n, i, c0, width, &acc);
        }
    }
    out
}

#[inline(always)]
fn tile<T: Real, const R: usize>(a: &[T], inner: usize, i0: usize, panel: &[T]) -> [[T; PANEL]; R] {
    let mut acc = [[T::zero(); PANEL]; R];
    let rows: [&[T]; R] = std::array::from_fn(|ii| &a[(i0 + ii) * inner..(i0 + ii + 1) * inner]);
    for (j, xs) in panel.chunks_exact(PANEL).enumerate() {
        for ii in 0..R {
            let aij = rows[ii][j];
            for cc in 0..PANEL {
                acc[ii][cc] = acc[ii][cc] + aij * xs[cc];
            }
        }
    }
    acc
}

#[inline(always)]
fn store<T: Real, const R: usize>(out: &mut [T], n: usize, i0: usize, c0: usize, width: usize, acc: &[[T; PANEL]; R]) {
    for (ii, row) in acc.iter().enumerate() {
        let start = (i0 + ii) * n + c0;
        out[start..start + width].copy_from_slice(&row[..width]);
    }
}

/// `W X + b` with `b` broadcast over the columns of `X`.
///
/// Each output entry is accumulated from zero over `k = 0..W.cols` in order and
/// the bias is added last, so a column gives the same bits whether it is
/// evaluated alone or inside a batch.
pub fn linear_forward<T: Real>(
    w: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    if w.cols != x.rows {
        return Err(DinerError::dims("linear_forward", w.shape_str(), x.shape_str()));
    }
    if b.rows != w.rows || b.cols != 1 {
        return Err(DinerError::dims("linear_forward bias", w.shape_str(), b.shape_str()));
    }
    let batch = x.cols;
    let mut data = ordered_product(&w.data, w.rows, w.cols, &x.data, batch);
    if batch > 0 {
        for (row, &br) in data.chunks_exact_mut(batch).zip(&b.data) {
            for d in row {
                *d = *d + br;
            }
        }
    }
    Ok(DenseMatrix::from_vec_unchecked(w.rows, batch, data))
}

#[derive(Debug, Clone)]
pub struct LinearGrads<T> {
    pub weight: DenseMatrix<T>,
    pub bias: DenseMatrix<T>,
    pub input: Option<DenseMatrix<T>>,
}

/// Gradients of `W X + b` given the upstream gradient `dz`.
///
/// Sums over the batch run in column order; sums over output rows run in row
/// order.
pub fn linear_backward<T: Real>(
    w: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
    dz: &DenseMatrix<T>,
    want_input: bool,
) -> Result<LinearGrads<T>> {
    if w.cols != x.rows || dz.rows != w.rows || dz.cols != x.cols {
        return Err(DinerError::dims(
            "linear_backward",
            format!("W {} X {}", w.shape_str(), x.shape_str()),
            format!("dZ {}", dz.shape_str()),
        ));
    }
    let (out_w, in_w, batch) = (w.rows, w.cols, x.cols);

    let xt = x.transpose();
    let dw = ordered_product(&dz.data, out_w, batch, &xt.data, in_w);
    let mut db = DenseMatrix::zeros(out_w, 1);
    for r in 0..out_w {
        let mut s = T::zero();
        for &g in dz.row(r) {
            s = s + g;
        }
        db.data[r] = s;
    }

    let input = want_input.then(|| {
        let wt = w.transpose();
        DenseMatrix::from_vec_unchecked(in_w, batch, ordered_product(&wt.data, in_w, out_w, &dz.data, batch))
    });

    Ok(LinearGrads {
        weight: DenseMatrix::from_vec_unchecked(out_w, in_w, dw),
        bias: db,
        input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Naive triple loop with the same accumulation order.
    fn oracle(w: &DenseMatrix<f64>, b: &DenseMatrix<f64>, x: &DenseMatrix<f64>) -> DenseMatrix<f64> {
        let mut out = DenseMatrix::zeros(w.rows(), x.cols());
        for r in 0..w.rows() {
            for c in 0..x.cols() {
                let mut s = 0.0;
                for k in 0..w.cols() {
                    s += w.get(r, k) * x.get(k, c);
                }
                out.set(r, c, s + b.get(r, 0));
            }
        }
        out
    }

    #[test]
    fn identity_passes_input_through() {
        let w = DenseMatrix::<f64>::identity(2);
        let b = DenseMatrix::zeros(2, 1);
        let x = DenseMatrix::new(2, 1, vec![3.0, 4.0]).unwrap();
        assert_eq!(linear_forward(&w, &b, &x).unwrap(), x);

        let w3 = DenseMatrix::<f64>::identity(3);
        let x3 = DenseMatrix::new(3, 1, vec![0.25, -7.5, 1e-3]).unwrap();
        assert_eq!(linear_forward(&w3, &DenseMatrix::zeros(3, 1), &x3).unwrap(), x3);
    }

    #[test]
    fn matches_triple_loop_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random(4, 3, &mut rng);
        let b = random(4, 1, &mut rng);
        let x = random(3, 5, &mut rng);
        let got = linear_forward(&w, &b, &x).unwrap();
        assert_eq!(got.data(), oracle(&w, &b, &x).data());
    }

    #[test]
    fn batched_columns_equal_single_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random(7, 5, &mut rng);
        let b = random(7, 1, &mut rng);
        let x = random(5, 11, &mut rng);
        let batched = linear_forward(&w, &b, &x).unwrap();
        for c in 0..x.cols() {
            let single = linear_forward(&w, &b, &x.select_columns(&[c])).unwrap();
            for r in 0..w.rows() {
                assert_eq!(single.get(r, 0).to_bits(), batched.get(r, c).to_bits());
            }
        }
    }

    #[test]
    fn ragged_tiles_match_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (m, k, n) in [(9, 13, 70), (1, 1, 1), (5, 64, 17), (4, 2, 8)] {
            let w = random(m, k, &mut rng);
            let b = random(m, 1, &mut rng);
            let x = random(k, n, &mut rng);
            assert_eq!(linear_forward(&w, &b, &x).unwrap().data(), oracle(&w, &b, &x).data());
        }
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let w = DenseMatrix::<f64>::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 1);
        let x = DenseMatrix::zeros(4, 1);
        let err = linear_forward(&w, &b, &x).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("4x1"), "{err}");
    }

    #[test]
    fn new_rejects_non_finite() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn backward_sums_match_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = random(3, 4, &mut rng);
        let x = random(4, 6, &mut rng);
        let dz = random(3, 6, &mut rng);
        let g = linear_backward(&w, &x, &dz, true).unwrap();
        for r in 0..3 {
            let mut db = 0.0;
            for c in 0..6 {
                db += dz.get(r, c);
            }
            assert_eq!(g.bias.get(r, 0), db);
            for k in 0..4 {
                let mut s = 0.0;
                for c in 0..6 {
                    s += dz.get(r, c) * x.get(k, c);
                }
                assert_eq!(g.weight.get(r, k), s);
            }
        }
        let dx = g.input.unwrap();
        for k in 0..4 {
            for c in 0..6 {
                let mut s = 0.0;
                for r in 0..3 {
                    s += w.get(r, k) * dz.get(r, c);
                }
                assert_eq!(dx.get(k, c), s);
            }
        }
    }
}
