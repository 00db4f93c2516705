//! Measurement directories: `measurements.toml` plus one 16-bit PGM per
//! distance. Pixel values are intensities divided by `intensity_scale`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Illumination, MeasurementSet};
use crate::error::{DinerError, Result};
use crate::signal::{load_image, save_image_with_depth, GridSignal};

const METADATA: &str = "measurements.toml";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    wavelength: f64,
    pitch: f64,
    height: usize,
    width: usize,
    distances: Vec<f64>,
    intensity_scale: f64,
    propagation: String,
    planes: Vec<String>,
    illumination: Illumination,
}

fn plane_name(k: usize) -> String {
    format!("plane_{k:02}.pgm")
}

/// Writes the set; intensities are quantized to 16 bits.
pub fn save_measurements(set: &MeasurementSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let peak = set.peak();
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let (h, w) = (set.height(), set.width());
    let mut planes = Vec::new();
    for (k, plane) in set.intensities.iter().enumerate() {
        let img = GridSignal::image(h, w, 1, plane.iter().map(|v| v / scale).collect())?;
        save_image_with_depth(&img, dir.join(plane_name(k)), 16)?;
        planes.push(plane_name(k));
    }
    let meta = Metadata {
        wavelength: set.illumination.wavelength(),
        pitch: set.illumination.pitch(),
        height: h,
        width: w,
        distances: set.distances.clone(),
        intensity_scale: scale,
        propagation: "angular-spectrum".into(),
        planes,
        illumination: set.illumination_kind,
    };
    let text = toml::to_string(&meta).map_err(|e| DinerError::Internal(e.to_string()))?;
    fs::write(dir.join(METADATA), text)?;
    Ok(())
}

pub fn load_measurements(dir: impl AsRef<Path>) -> Result<MeasurementSet> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(METADATA))?;
    let meta: Metadata = toml::from_str(&text)
        .map_err(|e| DinerError::Validation(format!("{}: {e}", dir.join(METADATA).display())))?;
    if meta.planes.len() != meta.distances.len() {
        return Err(DinerError::Validation(format!(
            "{} planes listed for {} distances",
            meta.planes.len(),
            meta.distances.len()
        )));
    }
    let mut intensities = Vec::with_capacity(meta.planes.len());
    for name in &meta.planes {
        let img = load_image(dir.join(name))?;
        if img.dims() != [meta.height, meta.width] || img.d_out() != 1 {
            return Err(DinerError::dims(
                "load_measurements",
                format!("{}x{} grayscale", meta.height, meta.width),
                format!("{name}: {:?}x{}", img.dims(), img.d_out()),
            ));
        }
        intensities.push(img.attributes().iter().map(|v| v * meta.intensity_scale).collect());
    }
    let p = meta.illumination.field(meta.height, meta.width, meta.pitch, meta.wavelength)?;
    MeasurementSet::new(meta.distances, intensities, meta.illumination, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lensless::synthetic_setup;

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let (_, set) = synthetic_setup(12, 10, 2e-6, 532e-9, &[5e-4, 1e-3, 1.5e-3], Illumination::Gaussian { sigma: 4.0 }, 2).unwrap();
        save_measurements(&set, dir.path()).unwrap();
        let back = load_measurements(dir.path()).unwrap();
        assert_eq!(back.distances, set.distances);
        assert_eq!(back.illumination, set.illumination);
        let tol = set.peak() / 65535.0;
        for (a, b) in back.intensities.iter().flatten().zip(set.intensities.iter().flatten()) {
            assert!((a - b).abs() <= tol);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (_, set) = synthetic_setup(4, 4, 2e-6, 532e-9, &[5e-4], Illumination::Uniform, 2).unwrap();
        save_measurements(&set, dir.path()).unwrap();
        let p = dir.path().join(METADATA);
        let text = fs::read_to_string(&p).unwrap();
        fs::write(&p, format!("bogus = 1\n{text}")).unwrap();
        assert!(matches!(load_measurements(dir.path()), Err(DinerError::Validation(_))));
    }
}
