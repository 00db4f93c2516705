//! Procedural test images with content across the whole spectrum: smooth
//! gradients, hard-edged shapes, oriented stripes and fine grain.

use rand::Rng;

use super::GridSignal;
use crate::error::Result;
use crate::rng::{substream, Stream};

fn color<R: Rng>(rng: &mut R, channels: usize) -> Vec<f64> {
    (0..channels).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Deterministic `height x width` image with `channels` channels in `[0, 1]`.
pub fn test_image(height: usize, width: usize, channels: usize, seed: u64) -> Result<GridSignal> {
    let mut rng = substream(seed, Stream::Synthetic);
    let (hf, wf) = (height as f64, width as f64);
    let mut img = vec![0.0; height * width * channels];

    // Background gradient.
    let c0 = color(&mut rng, channels);
    let c1 = color(&mut rng, channels);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dy, dx) = angle.sin_cos();
    for y in 0..height {
        for x in 0..width {
            let t = 0.5 + 0.5 * ((x as f64 / wf - 0.5) * dx + (y as f64 / hf - 0.5) * dy) * 1.4;
            let t = t.clamp(0.0, 1.0);
            for k in 0..channels {
                img[(y * width + x) * channels + k] = c0[k] * (1.0 - t) + c1[k] * t;
            }
        }
    }

    // Oriented stripes inside a random window.
    let (sy0, sx0) = (rng.gen_range(0.0..0.6) * hf, rng.gen_range(0.0..0.6) * wf);
    let (sh, sw) = (rng.gen_range(0.25..0.5) * hf, rng.gen_range(0.25..0.5) * wf);
    let period = rng.gen_range(2.5..8.0);
    let theta = rng.gen_range(0.0..std::f64::consts::PI);
    let sc = color(&mut rng, channels);
    for y in 0..height {
        for x in 0..width {
            let (yf, xf) = (y as f64, x as f64);
            if yf >= sy0 && yf < sy0 + sh && xf >= sx0 && xf < sx0 + sw {
                let phase = (xf * theta.cos() + yf * theta.sin()) * std::f64::consts::TAU / period;
                let a = 0.5 + 0.5 * phase.sin();
                for k in 0..channels {
                    let p = &mut img[(y * width + x) * channels + k];
                    *p = *p * (1.0 - a) + sc[k] * a;
                }
            }
        }
    }

    // Hard-edged disks and rectangles.
    let shapes = rng.gen_range(4..8);
    for _ in 0..shapes {
        let c = color(&mut rng, channels);
        let (cy, cx) = (rng.gen_range(0.0..hf), rng.gen_range(0.0..wf));
        let disk = rng.gen_bool(0.6);
        let (ry, rx) = (rng.gen_range(0.05..0.25) * hf, rng.gen_range(0.05..0.25) * wf);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                let inside = if disk { u * u + v * v <= 1.0 } else { u.abs() <= 1.0 && v.abs() <= 1.0 };
                if inside {
                    img[(y * width + x) * channels..(y * width + x + 1) * channels].copy_from_slice(&c);
                }
            }
        }
    }

    // Fine grain.
    let grain = rng.gen_range(0.02..0.08);
    for v in &mut img {
        *v = (*v + grain * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0);
    }
    GridSignal::image(height, width, channels, img)
}

/// `count` test images of one size, seeded from `seed`.
pub fn corpus(count: usize, height: usize, width: usize, channels: usize, seed: u64) -> Result<Vec<GridSignal>> {
    (0..count)
        .map(|i| test_image(height, width, channels, seed.wrapping_mul(1000).wrapping_add(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = test_image(32, 24, 3, 9).unwrap();
        assert_eq!(a, test_image(32, 24, 3, 9).unwrap());
        assert_ne!(a, test_image(32, 24, 3, 10).unwrap());
        assert!(a.attributes().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
