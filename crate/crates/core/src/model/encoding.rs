use std::f64::consts::PI;

use crate::error::{DinerError, Result};
use crate::math::{DenseMatrix, Real};

/// Fourier-feature encoding of coordinates.
///
/// Each input axis `x` expands to `[x?, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{K-1} pi x), cos(2^{K-1} pi x)]`,
/// axis blocks concatenated in axis order. `K = 0` with the raw input kept is
/// the identity map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositionalEncoding {
    pub num_frequencies: usize,
    pub include_input: bool,
}

impl Default for PositionalEncoding {
    fn default() -> Self {
        Self::identity()
    }
}

impl PositionalEncoding {
    pub const fn identity() -> Self {
        Self {
            num_frequencies: 0,
            include_input: true,
        }
    }

    pub const fn fourier(num_frequencies: usize) -> Self {
        Self {
            num_frequencies,
            include_input: true,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.num_frequencies == 0 && self.include_input
    }

    pub fn features_per_axis(&self) -> usize {
        2 * self.num_frequencies + usize::from(self.include_input)
    }

    pub fn output_dim(&self, d_in: usize) -> usize {
        d_in * self.features_per_axis()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features_per_axis() == 0 {
            return Err(DinerError::Validation(
                "positional encoding produces no features".into(),
            ));
        }
        if self.num_frequencies > 52 {
            return Err(DinerError::Validation(format!(
                "{} frequencies exceed float resolution",
                self.num_frequencies
            )));
        }
        Ok(())
    }

    fn frequency<T: Real>(k: usize) -> T {
        T::of(PI * (1u64 << k) as f64)
    }

    /// Encodes a `d_in x batch` coordinate matrix.
    pub fn encode<T: Real>(&self, coords: &DenseMatrix<T>) -> DenseMatrix<T> {
        if self.is_identity() {
            return coords.clone();
        }
        let per = self.features_per_axis();
        let batch = coords.cols();
        let mut out = DenseMatrix::zeros(coords.rows() * per, batch);
        for a in 0..coords.rows() {
            let x = coords.row(a);
            let mut r = a * per;
            if self.include_input {
                out.row_mut(r).copy_from_slice(x);
                r += 1;
            }
            for k in 0..self.num_frequencies {
                let f = Self::frequency::<T>(k);
                for (d, &v) in out.row_mut(r).iter_mut().zip(x) {
                    *d = (f * v).sin();
                }
                for (d, &v) in out.row_mut(r + 1).iter_mut().zip(x) {
                    *d = (f * v).cos();
                }
                r += 2;
            }
        }
        out
    }

    /// Pulls a gradient on the encoded features back onto the raw coordinates.
    pub fn backward<T: Real>(&self, coords: &DenseMatrix<T>, grad: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if grad.rows() != self.output_dim(coords.rows()) || grad.cols() != coords.cols() {
            return Err(DinerError::dims(
                "encoding backward",
                format!("coords {}", coords.shape_str()),
                format!("grad {}", grad.shape_str()),
            ));
        }
        if self.is_identity() {
            return Ok(grad.clone());
        }
        let per = self.features_per_axis();
        let mut out = DenseMatrix::zeros(coords.rows(), coords.cols());
        for a in 0..coords.rows() {
            let mut r = a * per;
            let x = coords.row(a).to_vec();
            let dst = out.row_mut(a);
            if self.include_input {
                for (d, &g) in dst.iter_mut().zip(grad.row(r)) {
                    *d = *d + g;
                }
                r += 1;
            }
            for k in 0..self.num_frequencies {
                let f = Self::frequency::<T>(k);
                let gs = grad.row(r);
                let gc = grad.row(r + 1);
                for c in 0..x.len() {
                    let (s, co) = (f * x[c]).sin_cos();
                    dst[c] = dst[c] + f * co * gs[c] - f * s * gc[c];
                }
                r += 2;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frequencies_is_identity() {
        let pe = PositionalEncoding::identity();
        let x = DenseMatrix::new(2, 3, vec![0.1, -0.5, 1.0, 0.0, 0.3, -1.0]).unwrap();
        assert_eq!(pe.encode(&x), x);
    }

    #[test]
    fn origin_gives_zero_sines_unit_cosines() {
        let pe = PositionalEncoding {
            num_frequencies: 6,
            include_input: false,
        };
        let x = DenseMatrix::<f64>::zeros(2, 1);
        let e = pe.encode(&x);
        assert_eq!(e.rows(), 24);
        for r in 0..e.rows() {
            let expected = if r % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(e.get(r, 0), expected);
        }
    }

    #[test]
    fn half_with_two_frequencies_matches_trig() {
        let pe = PositionalEncoding::fourier(2);
        let x = DenseMatrix::new(1, 1, vec![0.5]).unwrap();
        let e = pe.encode(&x);
        let want = [
            0.5,
            (PI * 0.5).sin(),
            (PI * 0.5).cos(),
            (2.0 * PI * 0.5).sin(),
            (2.0 * PI * 0.5).cos(),
        ];
        for (r, w) in want.iter().enumerate() {
            assert!((e.get(r, 0) - w).abs() <= 1e-15, "row {r}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let pe = PositionalEncoding::fourier(3);
        let x = DenseMatrix::new(2, 2, vec![0.21, -0.4, 0.77, 0.05]).unwrap();
        let g = DenseMatrix::from_fn(pe.output_dim(2), 2, |r, c| ((r * 7 + c * 3) % 5) as f64 - 2.0);
        let analytic = pe.backward(&x, &g).unwrap();
        let h = 1e-6;
        for a in 0..2 {
            for c in 0..2 {
                let f = |delta: f64| {
                    let mut xp = x.clone();
                    xp.set(a, c, xp.get(a, c) + delta);
                    let e = pe.encode(&xp);
                    e.data().iter().zip(g.data()).map(|(u, v)| u * v).sum::<f64>()
                };
                let fd = (f(h) - f(-h)) / (2.0 * h);
                assert!((fd - analytic.get(a, c)).abs() < 1e-6 * fd.abs().max(1.0));
            }
        }
    }
}
