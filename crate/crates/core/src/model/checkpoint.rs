//! Model checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! "DINM" | version u32 | config_len u32 | config (UTF-8)
//! kind u8 (1 = hash table, 0 = coordinate baseline)
//!   kind 1: hash-table blob ("DINR" format)
//!   kind 0: ndim u32 | ndim extents u64
//! K u32 | include_input u8 | input_width u32 | layer_count u32
//! per layer: out u32 | in u32 | activation tag u8 | omega0 f64 | dtype u8 | W (out*in) | b (out)
//! ```
//!
//! Optimizer state is not stored; a restored model starts with fresh moments.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::{AnyModel, Backbone, BaselineModel, CoordinateModel, DinerModel, Layer, PositionalEncoding};
use crate::error::{DinerError, Result};
use crate::hash::{read_values, GridIndexer, HashTable};
use crate::math::{Activation, DenseMatrix, Real};

const MAGIC: &[u8; 4] = b"DINM";
const VERSION: u32 = 1;

/// A restored model and the configuration text saved with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T = f64> {
    pub config: String,
    pub model: AnyModel<T>,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| DinerError::Validation(format!("{v} does not fit the checkpoint format")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn write_backbone<T: Real>(buf: &mut Vec<u8>, bb: &Backbone<T>) -> Result<()> {
    let enc = bb.encoding();
    put_u32(buf, enc.num_frequencies)?;
    buf.push(enc.include_input as u8);
    put_u32(buf, bb.input_width())?;
    put_u32(buf, bb.layers().len())?;
    for l in bb.layers() {
        put_u32(buf, l.out_width())?;
        put_u32(buf, l.in_width())?;
        buf.push(l.activation.tag());
        buf.extend_from_slice(&l.activation.omega0().to_le_bytes());
        buf.push(T::BYTES);
        for &v in l.weight.data().iter().chain(l.bias.data()) {
            v.write_le(buf);
        }
    }
    Ok(())
}

pub fn encode_checkpoint<T: Real>(model: &AnyModel<T>, config: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut buf, config.len())?;
    buf.extend_from_slice(config.as_bytes());
    match model {
        AnyModel::Diner(m) => {
            buf.push(1);
            m.table().write_to(&mut buf)?;
        }
        AnyModel::Baseline(m) => {
            buf.push(0);
            put_u32(&mut buf, m.indexer().ndim())?;
            for &d in m.indexer().dims() {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
        }
    }
    write_backbone(&mut buf, model.backbone())?;
    Ok(buf)
}

struct Reader<'a> {
    input: &'a [u8],
    all: &'a [u8],
}

impl Reader<'_> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.input
            .read_exact(&mut b)
            .map_err(|_| DinerError::format("checkpoint is truncated", self.all))?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.bytes()?) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

fn read_backbone<T: Real>(r: &mut Reader) -> Result<Backbone<T>> {
    let encoding = PositionalEncoding {
        num_frequencies: r.u32()?,
        include_input: r.u8()? != 0,
    };
    let input_width = r.u32()?;
    let count = r.u32()?;
    let mut layers = Vec::with_capacity(count.min(64));
    for j in 0..count {
        let (out, inp) = (r.u32()?, r.u32()?);
        let tag = r.u8()?;
        let omega0 = r.f64()?;
        let activation = Activation::from_tag(tag, omega0)
            .ok_or_else(|| DinerError::format(format!("layer {j} has unknown activation tag {tag}"), r.all))?;
        let dtype = r.u8()?;
        if dtype != 4 && dtype != 8 {
            return Err(DinerError::format(format!("layer {j} has unknown dtype {dtype}"), r.all));
        }
        let values = read_values::<T, _>(&mut r.input, out * inp + out, dtype)
            .map_err(|_| DinerError::format("checkpoint is truncated", r.all))?;
        let (w, b) = values.split_at(out * inp);
        layers.push(Layer::new(DenseMatrix::new(out, inp, w.to_vec())?, DenseMatrix::new(out, 1, b.to_vec())?, activation)?);
    }
    Backbone::from_layers(encoding, input_width, layers)
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader { input: bytes, all: bytes };
    if &r.bytes::<4>()? != MAGIC {
        return Err(DinerError::format("not a model checkpoint", bytes));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(DinerError::format(format!("unsupported checkpoint version {version}"), bytes));
    }
    let n = r.u32()?;
    if r.input.len() < n {
        return Err(DinerError::format("checkpoint is truncated", bytes));
    }
    let config = String::from_utf8(r.input[..n].to_vec())
        .map_err(|_| DinerError::format("configuration echo is not UTF-8", bytes))?;
    r.input = &r.input[n..];
    let model = match r.u8()? {
        1 => {
            let table = HashTable::read_from(&mut r.input)?;
            AnyModel::Diner(DinerModel::from_parts(table, read_backbone(&mut r)?)?)
        }
        0 => {
            let ndim = r.u32()?;
            let dims = (0..ndim).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            AnyModel::Baseline(BaselineModel::from_parts(GridIndexer::new(dims)?, read_backbone(&mut r)?)?)
        }
        k => return Err(DinerError::format(format!("unknown model kind {k}"), bytes)),
    };
    if !r.input.is_empty() {
        return Err(DinerError::format(format!("{} trailing bytes", r.input.len()), bytes));
    }
    Ok(Checkpoint { config, model })
}

pub fn save_checkpoint<T: Real>(model: &AnyModel<T>, config: &str, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model, config)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::HashInit;
    use crate::model::{BackboneConfig, BackboneKind};

    #[test]
    fn round_trips_both_kinds() {
        let cfg = BackboneConfig {
            kind: BackboneKind::siren(),
            hidden_layers: 2,
            hidden_width: 8,
            encoding: PositionalEncoding::fourier(2),
        };
        let d = AnyModel::Diner(DinerModel::<f64>::new(9, 2, 3, &cfg, HashInit::Uniform { low: -1.0, high: 1.0 }, 4).unwrap());
        let b = AnyModel::Baseline(BaselineModel::<f64>::new(GridIndexer::new(vec![3, 3]).unwrap(), 1, &BackboneConfig::default(), 4).unwrap());
        for m in [d, b] {
            let bytes = encode_checkpoint(&m, "seed = 4\n").unwrap();
            let back = decode_checkpoint::<f64>(&bytes).unwrap();
            assert_eq!(back.config, "seed = 4\n");
            assert_eq!(back.model, m);
        }
    }

    #[test]
    fn single_precision_round_trip() {
        let m = AnyModel::Diner(DinerModel::<f32>::new(4, 1, 1, &BackboneConfig::default(), HashInit::Zeros, 1).unwrap());
        let back = decode_checkpoint::<f32>(&encode_checkpoint(&m, "").unwrap()).unwrap();
        assert_eq!(back.model, m);
    }

    #[test]
    fn rejects_corruption() {
        let m = AnyModel::Diner(DinerModel::<f64>::new(4, 1, 1, &BackboneConfig::default(), HashInit::Zeros, 1).unwrap());
        let bytes = encode_checkpoint(&m, "").unwrap();
        assert!(matches!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 3]), Err(DinerError::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint::<f64>(&bad), Err(DinerError::Format { .. })));
        let mut extra = bytes;
        extra.push(0);
        assert!(decode_checkpoint::<f64>(&extra).is_err());
    }
}
