//! Raw grids of any dimension: the table header with magic `"DING"` and
//! `L = d_out`, then `ndim u32`, `ndim` extents as `u64`, then `N * d_out` f64 values.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::GridSignal;
use crate::error::{DinerError, Result};
use crate::hash::{read_header, read_values, write_header, GridIndexer};

const GRID_MAGIC: &[u8; 4] = b"DING";

pub fn write_raw_grid(signal: &GridSignal, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_header(&mut buf, GRID_MAGIC, signal.len() as u64, signal.d_out() as u32, 8);
    buf.extend_from_slice(&(signal.dims().len() as u32).to_le_bytes());
    for &d in signal.dims() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in signal.attributes() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_raw_grid(path: impl AsRef<Path>) -> Result<GridSignal> {
    let bytes = fs::read(path)?;
    let mut input = bytes.as_slice();
    let header = read_header(&mut input, GRID_MAGIC)?;
    let mut nd = [0u8; 4];
    input.read_exact(&mut nd)?;
    let ndim = u32::from_le_bytes(nd) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut d = [0u8; 8];
        input.read_exact(&mut d)?;
        dims.push(u64::from_le_bytes(d) as usize);
    }
    let indexer = GridIndexer::new(dims)?;
    if indexer.len() as u64 != header.len {
        return Err(DinerError::format(
            format!("extents give {} elements, header says {}", indexer.len(), header.len),
            &bytes,
        ));
    }
    let values = read_values::<f64, _>(&mut input, indexer.len() * header.width as usize, header.dtype)?;
    GridSignal::new(indexer, header.width as usize, values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}
