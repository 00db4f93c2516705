//! Full-resolution learnable hash table: one row of mapped coordinates per
//! grid element, addressed by the element's flattened grid index.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::distributions::{Distribution, Uniform};

use crate::error::{DinerError, Result};
use crate::math::{adam_update, AdamParams, DenseMatrix, Real};
use crate::rng::{substream, Stream};

/// Row-major flattening of integer grid coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridIndexer {
    dims: Vec<usize>,
}

impl GridIndexer {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(DinerError::Validation(format!(
                "grid extents must be non-empty and positive, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self, coord: &[usize]) -> Result<usize> {
        if coord.len() != self.dims.len() {
            return Err(DinerError::dims(
                "flatten",
                format!("{} axes", self.dims.len()),
                format!("coordinate with {} entries", coord.len()),
            ));
        }
        let mut index = 0;
        for (axis, (&c, &d)) in coord.iter().zip(&self.dims).enumerate() {
            if c >= d {
                return Err(DinerError::Index {
                    axis,
                    value: c,
                    extent: d,
                });
            }
            index = index * d + c;
        }
        Ok(index)
    }

    pub fn unflatten(&self, mut index: usize) -> Result<Vec<usize>> {
        let n = self.len();
        if index >= n {
            return Err(DinerError::Index {
                axis: 0,
                value: index,
                extent: n,
            });
        }
        let mut coord = vec![0; self.dims.len()];
        for (c, &d) in coord.iter_mut().zip(&self.dims).rev() {
            *c = index % d;
            index /= d;
        }
        Ok(coord)
    }

    /// Coordinates of `indices` mapped affinely to `[-1, 1]` per axis (`d_in x batch`).
    ///
    /// Axes of extent 1 map to 0.
    pub fn normalized_coords<T: Real>(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        let mut out = DenseMatrix::zeros(self.ndim(), indices.len());
        for (c, &i) in indices.iter().enumerate() {
            let coord = self.unflatten(i)?;
            for (a, (&x, &d)) in coord.iter().zip(&self.dims).enumerate() {
                let v = if d > 1 {
                    2.0 * x as f64 / (d - 1) as f64 - 1.0
                } else {
                    0.0
                };
                out.set(a, c, T::of(v));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HashInit {
    Zeros,
    Uniform { low: f64, high: f64 },
}

/// Gradient of the table restricted to the rows a batch touched.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad<T = f64> {
    pub width: usize,
    /// Distinct rows in first-occurrence order.
    pub rows: Vec<usize>,
    /// `rows.len() x width`, row-major.
    pub values: Vec<T>,
}

impl<T: Real> SparseGrad<T> {
    pub fn row(&self, slot: usize) -> &[T] {
        &self.values[slot * self.width..(slot + 1) * self.width]
    }

    /// Dense `len x width` expansion, mostly for checking.
    pub fn to_dense(&self, len: usize) -> Vec<T> {
        let mut out = vec![T::zero(); len * self.width];
        for (slot, &r) in self.rows.iter().enumerate() {
            out[r * self.width..(r + 1) * self.width].copy_from_slice(self.row(slot));
        }
        out
    }
}

/// `N x L` table of learnable mapped coordinates with per-row Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct HashTable<T = f64> {
    len: usize,
    width: usize,
    entries: Vec<T>,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
    steps: Vec<u32>,
    adam: AdamParams,
}

const TABLE_MAGIC: &[u8; 4] = b"DINR";
const FORMAT_VERSION: u32 = 1;

impl<T: Real> HashTable<T> {
    pub fn zeros(len: usize, width: usize) -> Result<Self> {
        if len == 0 || width == 0 {
            return Err(DinerError::Validation(format!(
                "hash table must be at least 1x1, got {len}x{width}"
            )));
        }
        Ok(Self {
            len,
            width,
            entries: vec![T::zero(); len * width],
            first_moment: vec![T::zero(); len * width],
            second_moment: vec![T::zero(); len * width],
            steps: vec![0; len],
            adam: AdamParams::default(),
        })
    }

    pub fn init(len: usize, width: usize, mode: HashInit, seed: u64) -> Result<Self> {
        let mut table = Self::zeros(len, width)?;
        if let HashInit::Uniform { low, high } = mode {
            if low.is_nan() || high.is_nan() || low >= high {
                return Err(DinerError::Validation(format!(
                    "uniform init needs low < high, got [{low}, {high})"
                )));
            }
            let mut rng = substream(seed, Stream::Init);
            let dist = Uniform::new(low, high);
            for e in &mut table.entries {
                *e = T::of(dist.sample(&mut rng));
            }
        }
        Ok(table)
    }

    /// Table with given entries (`len x width` row-major) and fresh optimizer state.
    pub fn from_entries(len: usize, width: usize, entries: Vec<T>) -> Result<Self> {
        let mut table = Self::zeros(len, width)?;
        if entries.len() != len * width {
            return Err(DinerError::dims(
                "HashTable::from_entries",
                format!("{len}x{width}"),
                format!("{} values", entries.len()),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(DinerError::Numeric {
                context: "hash table entries".into(),
            });
        }
        table.entries = entries;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.width..(i + 1) * self.width]
    }

    pub fn set_row(&mut self, i: usize, values: &[T]) -> Result<()> {
        self.check_index(i)?;
        if values.len() != self.width {
            return Err(DinerError::dims("set_row", self.width, values.len()));
        }
        self.entries[i * self.width..(i + 1) * self.width].copy_from_slice(values);
        Ok(())
    }

    pub fn adam_params(&self) -> AdamParams {
        self.adam
    }

    /// Sets hyperparameters; moments and step counts are kept.
    pub fn set_optimizer(&mut self, params: AdamParams) {
        self.adam = params;
    }

    /// Sets hyperparameters and clears moments and step counts.
    pub fn reset_optimizer(&mut self, params: AdamParams) {
        self.adam = params;
        self.first_moment.iter_mut().for_each(|v| *v = T::zero());
        self.second_moment.iter_mut().for_each(|v| *v = T::zero());
        self.steps.iter_mut().for_each(|s| *s = 0);
    }

    /// Per-row optimizer state `(first moment, second moment, step count)`.
    pub fn optimizer_row(&self, i: usize) -> (&[T], &[T], u32) {
        let s = i * self.width..(i + 1) * self.width;
        (&self.first_moment[s.clone()], &self.second_moment[s], self.steps[i])
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len {
            Err(DinerError::Index {
                axis: 0,
                value: i,
                extent: self.len,
            })
        } else {
            Ok(())
        }
    }

    /// Column `c` of the result is row `indices[c]` of the table.
    pub fn lookup(&self, indices: &[usize]) -> Result<DenseMatrix<T>> {
        let mut out = DenseMatrix::zeros(self.width, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            self.check_index(i)?;
            for (k, &v) in self.row(i).iter().enumerate() {
                out.set(k, c, v);
            }
        }
        Ok(out)
    }

    /// Accumulates the per-column input gradient onto the rows it came from.
    ///
    /// Cost is proportional to the batch. Repeated indices sum in batch order.
    pub fn scatter_grad(&self, indices: &[usize], d_input: &DenseMatrix<T>) -> Result<SparseGrad<T>> {
        if d_input.rows() != self.width || d_input.cols() != indices.len() {
            return Err(DinerError::dims(
                "scatter_grad",
                format!("{} x {} batch", self.width, indices.len()),
                d_input.shape_str(),
            ));
        }
        let mut slot_of: HashMap<usize, usize> = HashMap::with_capacity(indices.len());
        let mut rows = Vec::with_capacity(indices.len());
        let mut values: Vec<T> = Vec::with_capacity(indices.len() * self.width);
        for (c, &i) in indices.iter().enumerate() {
            self.check_index(i)?;
            let slot = *slot_of.entry(i).or_insert_with(|| {
                rows.push(i);
                values.extend(std::iter::repeat_n(T::zero(), self.width));
                rows.len() - 1
            });
            for k in 0..self.width {
                let v = &mut values[slot * self.width + k];
                *v = *v + d_input.get(k, c);
            }
        }
        Ok(SparseGrad {
            width: self.width,
            rows,
            values,
        })
    }

    /// Adam step on the touched rows only; other rows and their state are untouched.
    pub fn apply_sparse(&mut self, grad: &SparseGrad<T>) -> Result<()> {
        if grad.width != self.width {
            return Err(DinerError::dims("apply_sparse", self.width, grad.width));
        }
        for (slot, &r) in grad.rows.iter().enumerate() {
            self.check_index(r)?;
            let g = grad.row(slot);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(DinerError::Numeric {
                    context: format!("gradient of hash table row {r}"),
                });
            }
            let s = r * self.width..(r + 1) * self.width;
            self.steps[r] = self.steps[r].saturating_add(1);
            adam_update(
                &mut self.entries[s.clone()],
                g,
                &mut self.first_moment[s.clone()],
                &mut self.second_moment[s],
                self.steps[r] as u64,
                &self.adam,
            );
        }
        Ok(())
    }

    /// Appends `extra` zero columns (entries and optimizer state).
    pub fn widen(&mut self, extra: usize) {
        if extra == 0 {
            return;
        }
        let new_w = self.width + extra;
        let grow = |src: &[T]| {
            let mut out = vec![T::zero(); self.len * new_w];
            for i in 0..self.len {
                out[i * new_w..i * new_w + self.width].copy_from_slice(&src[i * self.width..(i + 1) * self.width]);
            }
            out
        };
        self.entries = grow(&self.entries);
        self.first_moment = grow(&self.first_moment);
        self.second_moment = grow(&self.second_moment);
        self.width = new_w;
    }

    /// Per-column `(min, max)` over all rows.
    pub fn column_bounds(&self) -> Vec<(T, T)> {
        let mut b = vec![(T::infinity(), T::neg_infinity()); self.width];
        for row in self.entries.chunks_exact(self.width) {
            for (bk, &v) in b.iter_mut().zip(row) {
                bk.0 = bk.0.min(v);
                bk.1 = bk.1.max(v);
            }
        }
        b
    }

    /// Flat little-endian encoding:
    /// `"DINR" | version u32 | N u64 | L u32 | dtype u8 | N*L values`.
    ///
    /// `dtype` is the byte width of a value (4 or 8).
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut buf = Vec::with_capacity(21 + self.entries.len() * T::BYTES as usize);
        write_header(&mut buf, TABLE_MAGIC, self.len as u64, self.width as u32, T::BYTES);
        for &v in &self.entries {
            v.write_le(&mut buf);
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let header = read_header(input, TABLE_MAGIC)?;
        let values = read_values::<T, R>(input, header.len as usize * header.width as usize, header.dtype)?;
        Self::from_entries(header.len as usize, header.width as usize, values)
    }
}

pub(crate) struct Header {
    pub len: u64,
    pub width: u32,
    pub dtype: u8,
}

pub(crate) fn write_header(buf: &mut Vec<u8>, magic: &[u8; 4], len: u64, width: u32, dtype: u8) {
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(&width.to_le_bytes());
    buf.push(dtype);
}

pub(crate) fn read_header<R: Read>(input: &mut R, magic: &[u8; 4]) -> Result<Header> {
    let mut h = [0u8; 21];
    input.read_exact(&mut h)?;
    if &h[..4] != magic {
        return Err(DinerError::format(
            format!("expected magic {:?}", String::from_utf8_lossy(magic)),
            &h,
        ));
    }
    let version = u32::from_le_bytes(h[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DinerError::format(format!("unsupported version {version}"), &h));
    }
    let len = u64::from_le_bytes(h[8..16].try_into().unwrap());
    let width = u32::from_le_bytes(h[16..20].try_into().unwrap());
    let dtype = h[20];
    if dtype != 4 && dtype != 8 {
        return Err(DinerError::format(format!("unknown dtype {dtype}"), &h));
    }
    Ok(Header { len, width, dtype })
}

pub(crate) fn read_values<T: Real, R: Read>(input: &mut R, count: usize, dtype: u8) -> Result<Vec<T>> {
    let mut raw = vec![0u8; count * dtype as usize];
    input.read_exact(&mut raw)?;
    Ok(raw
        .chunks_exact(dtype as usize)
        .map(|b| {
            if dtype == 8 {
                T::of(f64::read_le(b))
            } else {
                T::of(f32::read_le(b) as f64)
            }
        })
        .collect())
}
