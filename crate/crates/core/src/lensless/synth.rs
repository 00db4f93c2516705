use num_complex::Complex64;
use rand::Rng;

use super::{forward_measure, ComplexField, Illumination, MeasurementSet};
use crate::error::Result;
use crate::rng::{substream, Stream};

/// Resolution-target amplitude in `[0.25, 1]` with a smooth phase of a few
/// radians: bar groups of decreasing period and a square frame on a bright
/// background, phase from a sum of random Gaussian bumps.
pub fn synthetic_object(height: usize, width: usize, pitch: f64, wavelength: f64, seed: u64) -> Result<ComplexField> {
    let mut rng = substream(seed, Stream::Synthetic);
    let (hf, wf) = (height as f64, width as f64);
    let mut amp = vec![1.0; height * width];

    // Three bar groups, alternating orientation, each a quarter of the field.
    let periods = [8.0, 5.0, 3.0];
    let origins = [(0.1, 0.1), (0.1, 0.55), (0.55, 0.1)];
    for (g, (&period, &(oy, ox))) in periods.iter().zip(&origins).enumerate() {
        let (y0, x0) = ((oy * hf) as usize, (ox * wf) as usize);
        let (y1, x1) = (((oy + 0.35) * hf) as usize, ((ox + 0.35) * wf) as usize);
        for y in y0..y1.min(height) {
            for x in x0..x1.min(width) {
                let t = if g % 2 == 0 { x - x0 } else { y - y0 } as f64;
                if (t / (period / 2.0)).floor() as i64 % 2 == 0 {
                    amp[y * width + x] = 0.25;
                }
            }
        }
    }
    // Square frame in the remaining quadrant.
    let (fy0, fx0, fy1, fx1) = (0.6 * hf, 0.6 * wf, 0.9 * hf, 0.9 * wf);
    for y in 0..height {
        for x in 0..width {
            let (yf, xf) = (y as f64, x as f64);
            let inside = yf >= fy0 && yf < fy1 && xf >= fx0 && xf < fx1;
            let core = yf >= fy0 + 3.0 && yf < fy1 - 3.0 && xf >= fx0 + 3.0 && xf < fx1 - 3.0;
            if inside && !core {
                amp[y * width + x] = 0.4;
            }
        }
    }

    let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.2..0.8) * hf,
                rng.gen_range(0.2..0.8) * wf,
                rng.gen_range(0.15..0.35) * hf.min(wf),
                rng.gen_range(-1.5..1.5),
            )
        })
        .collect();
    let values = (0..height * width)
        .map(|i| {
            let (y, x) = ((i / width) as f64, (i % width) as f64);
            let phase: f64 = bumps
                .iter()
                .map(|&(cy, cx, s, a)| a * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp())
                .sum();
            Complex64::from_polar(amp[i], phase)
        })
        .collect();
    ComplexField::new(height, width, pitch, wavelength, values)
}

/// Ground-truth object and its noise-free measurements at `distances`.
pub fn synthetic_setup(
    height: usize,
    width: usize,
    pitch: f64,
    wavelength: f64,
    distances: &[f64],
    illumination: Illumination,
    seed: u64,
) -> Result<(ComplexField, MeasurementSet)> {
    let object = synthetic_object(height, width, pitch, wavelength, seed)?;
    let p = illumination.field(height, width, pitch, wavelength)?;
    let template = MeasurementSet::template(distances.to_vec(), illumination, p)?;
    let planes = forward_measure(&object, &template)?;
    let set = MeasurementSet::new(distances.to_vec(), planes, illumination, template.illumination)?;
    Ok((object, set))
}
