//! Binary PGM (P5) / PPM (P6) codec, 8 or 16 bits per sample.

use std::fs;
use std::path::Path;

use super::GridSignal;
use crate::error::{DinerError, Result};
use crate::hash::GridIndexer;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u64> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<GridSignal> {
    let head = &bytes[..bytes.len().min(16)];
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(DinerError::format("not a PNM file", head));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        _ => return Err(DinerError::format("only binary P5/P6 images are supported", head)),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let (width, height, maxval) = match (cur.number(), cur.number(), cur.number()) {
        (Some(w), Some(h), Some(m)) => (w as usize, h as usize, m),
        _ => return Err(DinerError::format("malformed header", head)),
    };
    let header = &bytes[..cur.pos.min(bytes.len())];
    if maxval == 0 || maxval > 65535 {
        return Err(DinerError::format(format!("maxval {maxval} outside 1..=65535"), header));
    }
    if width == 0 || height == 0 {
        return Err(DinerError::format("zero image dimension", header));
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(DinerError::format("missing separator after maxval", header));
    }
    let data = &bytes[cur.pos + 1..];
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let count = width * height * channels;
    if data.len() < count * sample_bytes {
        return Err(DinerError::format(
            format!("truncated pixel data: need {} bytes, have {}", count * sample_bytes, data.len()),
            header,
        ));
    }
    let scale = maxval as f64;
    let attrs = (0..count)
        .map(|i| {
            let raw = if sample_bytes == 1 {
                data[i] as f64
            } else {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as f64
            };
            (raw / scale).clamp(0.0, 1.0)
        })
        .collect();
    GridSignal::image(height, width, channels, attrs)
}

/// Encodes a 2D signal with 1 or 3 channels; values are clamped to `[0, 1]`.
pub fn encode_pnm(signal: &GridSignal, bits: u32) -> Result<Vec<u8>> {
    if signal.dims().len() != 2 || !matches!(signal.d_out(), 1 | 3) {
        return Err(DinerError::Validation(format!(
            "image export needs a 2D grid with 1 or 3 channels, got {:?} x {}",
            signal.dims(),
            signal.d_out()
        )));
    }
    let maxval: u32 = match bits {
        8 => 255,
        16 => 65535,
        _ => return Err(DinerError::Validation(format!("unsupported bit depth {bits}"))),
    };
    let (h, w) = (signal.dims()[0], signal.dims()[1]);
    let magic = if signal.d_out() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    for &v in signal.attributes() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if bits == 8 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    Ok(out)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GridSignal> {
    decode_pnm(&fs::read(path)?)
}

pub fn save_image(signal: &GridSignal, path: impl AsRef<Path>) -> Result<()> {
    save_image_with_depth(signal, path, 8)
}

pub fn save_image_with_depth(signal: &GridSignal, path: impl AsRef<Path>, bits: u32) -> Result<()> {
    fs::write(path, encode_pnm(signal, bits)?)?;
    Ok(())
}

/// Stacks equally sized frames into a `frames x height x width` signal.
pub fn load_image_sequence<P: AsRef<Path>>(paths: &[P]) -> Result<GridSignal> {
    let frames = paths.iter().map(load_image).collect::<Result<Vec<_>>>()?;
    let first = frames.first().ok_or(DinerError::EmptySignal)?;
    let mut attrs = Vec::with_capacity(first.attributes().len() * frames.len());
    for f in &frames {
        if !f.same_shape(first) {
            return Err(DinerError::dims(
                "load_image_sequence",
                format!("{:?}x{}", first.dims(), first.d_out()),
                format!("{:?}x{}", f.dims(), f.d_out()),
            ));
        }
        attrs.extend_from_slice(f.attributes());
    }
    let dims = vec![frames.len(), first.dims()[0], first.dims()[1]];
    GridSignal::new(GridIndexer::new(dims)?, first.d_out(), attrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;

    #[test]
    fn decodes_small_pgm() {
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 128, 64]);
        let s = decode_pnm(&bytes).unwrap();
        assert_eq!(s.dims(), &[2, 2]);
        assert_eq!(s.attributes(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn ppm_maxval_limits() {
        let mut ok = b"P6 1 1 255\n".to_vec();
        ok.extend_from_slice(&[1, 2, 3]);
        assert_eq!(decode_pnm(&ok).unwrap().d_out(), 3);
        let mut bad = b"P6 1 1 70000\n".to_vec();
        bad.extend_from_slice(&[0; 6]);
        match decode_pnm(&bad).unwrap_err() {
            DinerError::Format { message, header } => {
                assert!(message.contains("70000"));
                assert_eq!(&header[..2], b"P6");
            }
            e => panic!("{e}"),
        }
        assert!(matches!(decode_pnm(b"P3 1 1 255\n1 2 3"), Err(DinerError::Format { .. })));
        assert!(matches!(decode_pnm(b"P5 2 2 255\n\x01"), Err(DinerError::Format { .. })));
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0x80, 0x00]);
        let s = decode_pnm(&bytes).unwrap();
        assert_eq!(s.attributes()[0], 1.0);
        assert_eq!(s.attributes()[1], 32768.0 / 65535.0);
    }

    #[test]
    fn round_trip_within_quantization() {
        let mut rng = substream(4, Stream::Synthetic);
        for (bits, channels) in [(8, 3), (16, 1)] {
            let s = GridSignal::image(5, 7, channels, (0..35 * channels).map(|_| rng.gen::<f64>()).collect()).unwrap();
            let back = decode_pnm(&encode_pnm(&s, bits).unwrap()).unwrap();
            let bound = 0.5 / ((1u64 << bits) - 1) as f64 + 1e-15;
            for (a, b) in s.attributes().iter().zip(back.attributes()) {
                assert!((a - b).abs() <= bound);
            }
        }
    }

    #[test]
    fn export_requires_image_shape() {
        let s = GridSignal::constant(vec![2, 2], &[0.0, 0.0]).unwrap();
        assert!(encode_pnm(&s, 8).is_err());
    }
}
