//! Discrete grid signals and operations on their arrangement.

mod pnm;
mod rank;
mod raw;
pub mod synth;

use rand::seq::SliceRandom;
use rand::Rng;

pub use pnm::{decode_pnm, encode_pnm, load_image, load_image_sequence, save_image, save_image_with_depth};
pub use rank::{attribute_rank, singular_values};
pub use raw::{read_raw_grid, write_raw_grid};

use crate::error::{DinerError, Result};
use crate::hash::GridIndexer;
use crate::math::{DenseMatrix, Real};

/// `N` grid elements, each carrying `d_out` attributes (element-major storage).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSignal {
    indexer: GridIndexer,
    d_out: usize,
    attributes: Vec<f64>,
}

impl GridSignal {
    pub fn new(indexer: GridIndexer, d_out: usize, attributes: Vec<f64>) -> Result<Self> {
        if d_out == 0 {
            return Err(DinerError::Validation("signal needs at least one channel".into()));
        }
        if attributes.len() != indexer.len() * d_out {
            return Err(DinerError::dims(
                "GridSignal::new",
                format!("{:?} x {d_out}", indexer.dims()),
                format!("{} values", attributes.len()),
            ));
        }
        if attributes.iter().any(|v| !v.is_finite()) {
            return Err(DinerError::Numeric {
                context: "signal attributes".into(),
            });
        }
        Ok(Self {
            indexer,
            d_out,
            attributes,
        })
    }

    /// 2D image of `height x width` pixels; axis 0 is the row.
    pub fn image(height: usize, width: usize, channels: usize, attributes: Vec<f64>) -> Result<Self> {
        Self::new(GridIndexer::new(vec![height, width])?, channels, attributes)
    }

    pub fn constant(dims: Vec<usize>, value: &[f64]) -> Result<Self> {
        let indexer = GridIndexer::new(dims)?;
        let attrs = value.iter().copied().cycle().take(indexer.len() * value.len()).collect();
        Self::new(indexer, value.len(), attrs)
    }

    pub fn indexer(&self) -> &GridIndexer {
        &self.indexer
    }

    pub fn dims(&self) -> &[usize] {
        self.indexer.dims()
    }

    pub fn len(&self) -> usize {
        self.indexer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn attributes(&self) -> &[f64] {
        &self.attributes
    }

    pub fn attribute(&self, i: usize) -> &[f64] {
        &self.attributes[i * self.d_out..(i + 1) * self.d_out]
    }

    pub fn channel(&self, k: usize) -> Vec<f64> {
        self.attributes.iter().skip(k).step_by(self.d_out).copied().collect()
    }

    /// Keeps the listed channels in order.
    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&bad) = channels.iter().find(|&&k| k >= self.d_out) {
            return Err(DinerError::Index {
                axis: 1,
                value: bad,
                extent: self.d_out,
            });
        }
        let attrs = self
            .attributes
            .chunks_exact(self.d_out)
            .flat_map(|a| channels.iter().map(move |&k| a[k]))
            .collect();
        Self::new(self.indexer.clone(), channels.len(), attrs)
    }

    /// `d_out x batch` matrix of the attributes at `indices`.
    pub fn targets<T: Real>(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        let mut out = DenseMatrix::zeros(self.d_out, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(DinerError::Index {
                    axis: 0,
                    value: i,
                    extent: self.len(),
                });
            }
            for (k, &v) in self.attribute(i).iter().enumerate() {
                out.set(k, c, T::of(v));
            }
        }
        Ok(out)
    }

    /// Signal on the same grid from a `d_out x N` matrix in index order.
    pub fn from_columns<T: Real>(indexer: GridIndexer, m: &DenseMatrix<T>) -> Result<Self> {
        let t = m.transpose();
        Self::new(indexer, m.rows(), t.data().iter().map(|v| v.as_f64()).collect())
    }

    pub fn clamped(&self) -> Self {
        Self {
            indexer: self.indexer.clone(),
            d_out: self.d_out,
            attributes: self.attributes.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// Mean over channels, per element.
    pub fn luminance(&self) -> Vec<f64> {
        self.attributes
            .chunks_exact(self.d_out)
            .map(|a| a.iter().sum::<f64>() / self.d_out as f64)
            .collect()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.d_out == other.d_out
    }
}

/// Bijection of `[0, N)`. Applying it gathers: element `i` of the result is
/// element `map[i]` of the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(DinerError::Validation(format!(
                    "permutation is not a bijection (entry {m} of {})",
                    map.len()
                )));
            }
            seen[m] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// Uniformly random permutation.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Self { map: inv }
    }

    /// Gathers rows of a row-major `N x width` buffer.
    pub fn gather<T: Copy>(&self, values: &[T], width: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(values.len());
        for &m in &self.map {
            out.extend_from_slice(&values[m * width..(m + 1) * width]);
        }
        out
    }
}

/// Reorders the attributes of `signal` over the same grid.
pub fn permute(signal: &GridSignal, perm: &Permutation) -> Result<GridSignal> {
    if perm.len() != signal.len() {
        return Err(DinerError::Validation(format!(
            "permutation over {} elements applied to signal of {}",
            perm.len(),
            signal.len()
        )));
    }
    GridSignal::new(
        signal.indexer.clone(),
        signal.d_out,
        perm.gather(&signal.attributes, signal.d_out),
    )
}

/// Stable ascending sort by luminance in row-major scan order.
pub fn sort_by_intensity(signal: &GridSignal) -> Result<(GridSignal, Permutation)> {
    let lum = signal.luminance();
    let mut map: Vec<usize> = (0..signal.len()).collect();
    map.sort_by(|&a, &b| lum[a].total_cmp(&lum[b]));
    let perm = Permutation { map };
    Ok((permute(signal, &perm)?, perm))
}

/// Builds `d_out_total` channels as linear combinations of `base`'s channels.
///
/// `mix` is `d_out_total x base.d_out` and must start with the identity so the
/// base channels are kept verbatim.
pub fn make_rank_deficient(
    base: &GridSignal,
    d_out_total: usize,
    mix: &DenseMatrix<f64>,
    clamp: bool,
) -> Result<GridSignal> {
    let k = base.d_out;
    if mix.rows() != d_out_total || mix.cols() != k || d_out_total < k {
        return Err(DinerError::dims(
            "make_rank_deficient",
            format!("{d_out_total}x{k} mix"),
            mix.shape_str(),
        ));
    }
    for r in 0..k {
        for c in 0..k {
            let want = if r == c { 1.0 } else { 0.0 };
            if mix.get(r, c) != want {
                return Err(DinerError::Validation(
                    "leading block of the mix must be the identity".into(),
                ));
            }
        }
    }
    let mut attrs = Vec::with_capacity(base.len() * d_out_total);
    for a in base.attributes.chunks_exact(k) {
        for j in 0..d_out_total {
            let mut v = 0.0;
            for (c, &x) in a.iter().enumerate() {
                v += mix.get(j, c) * x;
            }
            attrs.push(if clamp { v.clamp(0.0, 1.0) } else { v });
        }
    }
    GridSignal::new(base.indexer.clone(), d_out_total, attrs)
}

/// Identity block followed by random convex combinations, so mixed channels
/// stay inside `[0, 1]` when the base does.
pub fn random_convex_mix<R: Rng + ?Sized>(base_channels: usize, total: usize, rng: &mut R) -> DenseMatrix<f64> {
    let mut mix = DenseMatrix::zeros(total, base_channels);
    for r in 0..total {
        if r < base_channels {
            mix.set(r, r, 1.0);
            continue;
        }
        let w: Vec<f64> = (0..base_channels).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        for (c, wc) in w.iter().enumerate() {
            mix.set(r, c, wc / s);
        }
    }
    mix
}

fn mse_values(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s / a.len() as f64
}

/// PSNR in dB for a peak of 1; `f64::INFINITY` when the signals are equal.
pub fn psnr(a: &GridSignal, b: &GridSignal) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(DinerError::dims(
            "psnr",
            format!("{:?}x{}", a.dims(), a.d_out),
            format!("{:?}x{}", b.dims(), b.d_out),
        ));
    }
    Ok(psnr_from_mse(mse_values(&a.attributes, &b.attributes)))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> GridSignal {
        let mut rng = substream(seed, Stream::Synthetic);
        GridSignal::image(h, w, c, (0..h * w * c).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    #[test]
    fn identity_and_inverse_permutations() {
        let s = random_image(5, 4, 3, 1);
        assert_eq!(permute(&s, &Permutation::identity(20)).unwrap(), s);
        let p = Permutation::random(20, &mut substream(2, Stream::Permutation));
        let back = permute(&permute(&s, &p).unwrap(), &p.inverse()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        let s = random_image(2, 2, 1, 0);
        assert!(permute(&s, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn sorted_signal_is_non_decreasing() {
        let s = random_image(8, 8, 1, 3);
        let (sorted, perm) = sort_by_intensity(&s).unwrap();
        let mut oracle = s.attributes().to_vec();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sorted.attributes(), oracle.as_slice());
        assert_eq!(permute(&s, &perm).unwrap(), sorted);
    }

    #[test]
    fn sort_is_stable_for_ties() {
        let s = GridSignal::image(1, 4, 1, vec![0.5, 0.1, 0.5, 0.1]).unwrap();
        let (_, perm) = sort_by_intensity(&s).unwrap();
        assert_eq!(perm.map(), &[1, 3, 0, 2]);
    }

    #[test]
    fn psnr_cases() {
        let a = random_image(4, 4, 3, 4);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let shifted = GridSignal::new(a.indexer().clone(), 3, a.attributes().iter().map(|v| v + 0.1).collect()).unwrap();
        assert!((psnr(&a, &shifted).unwrap() - 20.0).abs() < 1e-9);
        let b = random_image(4, 4, 3, 5);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        let c = random_image(4, 4, 1, 5);
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn psnr_matches_scalar_loop() {
        let a = random_image(6, 7, 2, 8);
        let b = random_image(6, 7, 2, 9);
        let mut s = 0.0;
        for i in 0..a.attributes().len() {
            s += (a.attributes()[i] - b.attributes()[i]).powi(2);
        }
        let oracle = -10.0 * (s / 84.0).log10();
        assert!((psnr(&a, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn identity_mix_keeps_base() {
        let base = random_image(4, 4, 2, 6);
        let out = make_rank_deficient(&base, 2, &DenseMatrix::identity(2), false).unwrap();
        assert_eq!(out, base);
        let mut bad = DenseMatrix::identity(2);
        bad.set(0, 1, 0.5);
        assert!(make_rank_deficient(&base, 2, &bad, false).is_err());
        assert!(make_rank_deficient(&base, 3, &DenseMatrix::identity(2), false).is_err());
    }

    #[test]
    fn select_channels_reorders() {
        let s = GridSignal::image(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let t = s.select_channels(&[2, 0]).unwrap();
        assert_eq!(t.attributes(), &[3.0, 1.0, 6.0, 4.0]);
    }
}
