//! Multi-height lensless imaging: angular-spectrum propagation, the
//! intensity forward model `I_z = |prop_z(P * O)|^2`, its adjoint, and
//! phase retrieval driven by a coordinate model.

mod io;
mod solve;
mod synth;

pub use io::{load_measurements, save_measurements};
pub use solve::{amplitude_psnr, solve_phase, MeasurementObjective, Parameterization};
pub use synth::{synthetic_object, synthetic_setup};

pub use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DinerError, Result};
use crate::spectrum::Fft2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sampled complex field on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    height: usize,
    width: usize,
    /// Sample spacing in metres.
    pitch: f64,
    /// Wavelength in metres.
    wavelength: f64,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(height: usize, width: usize, pitch: f64, wavelength: f64, values: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(DinerError::EmptySignal);
        }
        if !(pitch > 0.0 && pitch.is_finite() && wavelength > 0.0 && wavelength.is_finite()) {
            return Err(DinerError::Validation(format!(
                "pitch and wavelength must be positive, got {pitch} and {wavelength}"
            )));
        }
        if values.len() != height * width {
            return Err(DinerError::dims("ComplexField", format!("{height}x{width}"), format!("{} values", values.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(DinerError::Numeric {
                context: "complex field".into(),
            });
        }
        Ok(Self {
            height,
            width,
            pitch,
            wavelength,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, pitch: f64, wavelength: f64, value: Complex64) -> Result<Self> {
        Self::new(height, width, pitch, wavelength, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Same grid and optics with new values.
    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        Self::new(self.height, self.width, self.pitch, self.wavelength, values)
    }

    fn check_same_grid(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(DinerError::dims(
                op,
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        Ok(())
    }
}

/// Angular-spectrum transfer function in FFT order: entry `(ky, kx)` holds
/// `exp(i 2 pi z sqrt(1/lambda^2 - fx^2 - fy^2))` with `fx = kx' / (width * pitch)`
/// (`kx'` the signed frequency index), and 0 for evanescent frequencies.
pub fn transfer_function(height: usize, width: usize, pitch: f64, wavelength: f64, z: f64) -> Vec<Complex64> {
    if pitch < wavelength {
        log::warn!("pixel pitch {pitch} is below the wavelength {wavelength}; sampling exceeds the propagating band");
    }
    let signed = |k: usize, n: usize| if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    let inv_l2 = 1.0 / (wavelength * wavelength);
    let mut h = Vec::with_capacity(height * width);
    for ky in 0..height {
        let fy = signed(ky, height) / (height as f64 * pitch);
        for kx in 0..width {
            let fx = signed(kx, width) / (width as f64 * pitch);
            let arg = inv_l2 - fx * fx - fy * fy;
            h.push(if arg > 0.0 {
                Complex64::from_polar(1.0, std::f64::consts::TAU * z * arg.sqrt())
            } else {
                ZERO
            });
        }
    }
    h
}

/// FFT plans and per-height transfer functions for one grid.
#[derive(Debug)]
pub struct Propagator {
    fft: Fft2,
    pitch: f64,
    wavelength: f64,
    distances: Vec<f64>,
    transfers: Vec<Vec<Complex64>>,
}

impl Propagator {
    pub fn new(height: usize, width: usize, pitch: f64, wavelength: f64, distances: &[f64]) -> Result<Self> {
        Ok(Self {
            fft: Fft2::new(height, width)?,
            pitch,
            wavelength,
            distances: distances.to_vec(),
            transfers: distances
                .iter()
                .map(|&z| transfer_function(height, width, pitch, wavelength, z))
                .collect(),
        })
    }

    pub fn for_field(field: &ComplexField, distances: &[f64]) -> Result<Self> {
        Self::new(field.height, field.width, field.pitch, field.wavelength, distances)
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// In place `IFFT(H_k FFT(u))`, or with `conj(H_k)` for the adjoint.
    pub fn apply(&self, plane: usize, data: &mut [Complex64], adjoint: bool) -> Result<()> {
        self.fft.forward(data)?;
        for (d, h) in data.iter_mut().zip(&self.transfers[plane]) {
            *d *= if adjoint { h.conj() } else { *h };
        }
        self.fft.inverse(data)
    }

    fn check(&self, field: &ComplexField) -> Result<()> {
        let (h, w) = self.fft.shape();
        if (field.height, field.width) != (h, w) {
            return Err(DinerError::dims("propagator", format!("{h}x{w}"), format!("{}x{}", field.height, field.width)));
        }
        if field.pitch != self.pitch || field.wavelength != self.wavelength {
            return Err(DinerError::Validation("field optics differ from the propagator's".into()));
        }
        Ok(())
    }
}

fn propagate_impl(field: &ComplexField, z: f64, adjoint: bool) -> Result<ComplexField> {
    let p = Propagator::for_field(field, &[z])?;
    let mut data = field.values.clone();
    p.apply(0, &mut data, adjoint)?;
    field.with_values(data)
}

/// Field after free-space propagation over `z` metres.
pub fn propagate(field: &ComplexField, z: f64) -> Result<ComplexField> {
    propagate_impl(field, z, false)
}

/// Adjoint of [`propagate`] under `<a, b> = sum conj(a) b`.
pub fn propagate_adjoint(field: &ComplexField, z: f64) -> Result<ComplexField> {
    propagate_impl(field, z, true)
}

/// Illumination profile `P(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "IlluminationSpec")]
pub enum Illumination {
    Uniform,
    /// Gaussian amplitude with standard deviation `sigma` in pixels, centred on the grid.
    Gaussian { sigma: f64 },
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum IlluminationKind {
    Uniform,
    Gaussian,
}

// Internally tagged unit variants silently accept extra keys; a flat struct keeps parsing strict.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IlluminationSpec {
    kind: IlluminationKind,
    sigma: Option<f64>,
}

impl TryFrom<IlluminationSpec> for Illumination {
    type Error = String;

    fn try_from(s: IlluminationSpec) -> std::result::Result<Self, String> {
        match (s.kind, s.sigma) {
            (IlluminationKind::Uniform, None) => Ok(Illumination::Uniform),
            (IlluminationKind::Uniform, Some(_)) => Err("uniform illumination takes no sigma".into()),
            (IlluminationKind::Gaussian, Some(sigma)) => Ok(Illumination::Gaussian { sigma }),
            (IlluminationKind::Gaussian, None) => Err("gaussian illumination needs sigma".into()),
        }
    }
}

impl Illumination {
    pub fn field(&self, height: usize, width: usize, pitch: f64, wavelength: f64) -> Result<ComplexField> {
        let values = match *self {
            Illumination::Uniform => vec![Complex64::new(1.0, 0.0); height * width],
            Illumination::Gaussian { sigma } => {
                if sigma.is_nan() || sigma <= 0.0 {
                    return Err(DinerError::Validation(format!("illumination sigma must be positive, got {sigma}")));
                }
                let (cy, cx) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
                (0..height * width)
                    .map(|i| {
                        let (y, x) = ((i / width) as f64 - cy, (i % width) as f64 - cx);
                        Complex64::new((-(y * y + x * x) / (2.0 * sigma * sigma)).exp(), 0.0)
                    })
                    .collect()
            }
        };
        ComplexField::new(height, width, pitch, wavelength, values)
    }
}

/// Intensity planes recorded at several sensor distances under one illumination.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub distances: Vec<f64>,
    /// One row-major plane per distance.
    pub intensities: Vec<Vec<f64>>,
    pub illumination_kind: Illumination,
    pub illumination: ComplexField,
}

impl MeasurementSet {
    pub fn new(distances: Vec<f64>, intensities: Vec<Vec<f64>>, illumination_kind: Illumination, illumination: ComplexField) -> Result<Self> {
        if distances.is_empty() {
            return Err(DinerError::Validation("at least one distance is required".into()));
        }
        if distances.len() != intensities.len() {
            return Err(DinerError::dims("MeasurementSet", format!("{} distances", distances.len()), format!("{} planes", intensities.len())));
        }
        for (k, plane) in intensities.iter().enumerate() {
            if plane.len() != illumination.len() {
                return Err(DinerError::dims("MeasurementSet", illumination.len(), format!("plane {k} with {} values", plane.len())));
            }
            if plane.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(DinerError::Validation(format!("plane {k} has negative or non-finite intensities")));
            }
        }
        Ok(Self {
            distances,
            intensities,
            illumination_kind,
            illumination,
        })
    }

    /// A set with no recorded data yet, used as a forward-model template.
    pub fn template(distances: Vec<f64>, illumination_kind: Illumination, illumination: ComplexField) -> Result<Self> {
        let planes = vec![vec![0.0; illumination.len()]; distances.len()];
        Self::new(distances, planes, illumination_kind, illumination)
    }

    pub fn height(&self) -> usize {
        self.illumination.height
    }

    pub fn width(&self) -> usize {
        self.illumination.width
    }

    pub fn propagator(&self) -> Result<Propagator> {
        Propagator::for_field(&self.illumination, &self.distances)
    }

    /// Largest recorded intensity, the peak used for measurement-domain PSNR.
    pub fn peak(&self) -> f64 {
        self.intensities.iter().flatten().cloned().fold(0.0, f64::max)
    }
}

/// Propagated fields `U_z = prop_z(P * O)` for every distance.
pub fn propagated_fields(object: &ComplexField, set: &MeasurementSet, prop: &Propagator) -> Result<Vec<Vec<Complex64>>> {
    object.check_same_grid(&set.illumination, "forward_measure")?;
    prop.check(object)?;
    let exit: Vec<Complex64> = object.values.iter().zip(&set.illumination.values).map(|(o, p)| o * p).collect();
    (0..set.distances.len())
        .map(|k| {
            let mut u = exit.clone();
            prop.apply(k, &mut u, false)?;
            Ok(u)
        })
        .collect()
}

/// Intensities `|prop_z(P * O)|^2` at the set's distances.
pub fn forward_measure(object: &ComplexField, set: &MeasurementSet) -> Result<Vec<Vec<f64>>> {
    let prop = set.propagator()?;
    Ok(propagated_fields(object, set, &prop)?
        .into_iter()
        .map(|u| u.iter().map(|v| v.norm_sqr()).collect())
        .collect())
}

/// Gradient of a loss with `dL/dI_z = residuals[z]`, as the complex number
/// `dL/dRe(O) + i dL/dIm(O)` per sample, given the propagated fields.
pub fn backward_from_fields(
    fields: &[Vec<Complex64>],
    set: &MeasurementSet,
    prop: &Propagator,
    residuals: &[Vec<f64>],
) -> Result<Vec<Complex64>> {
    if residuals.len() != fields.len() {
        return Err(DinerError::dims("backward_measure", format!("{} planes", fields.len()), format!("{} residual planes", residuals.len())));
    }
    let n = set.illumination.len();
    let mut grad = vec![ZERO; n];
    for (k, (u, r)) in fields.iter().zip(residuals).enumerate() {
        if r.len() != n {
            return Err(DinerError::dims("backward_measure", n, format!("residual plane {k} with {} values", r.len())));
        }
        let mut g: Vec<Complex64> = u.iter().zip(r).map(|(u, &r)| 2.0 * r * u).collect();
        prop.apply(k, &mut g, true)?;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    for (acc, p) in grad.iter_mut().zip(&set.illumination.values) {
        *acc *= p.conj();
    }
    Ok(grad)
}

/// Gradient with respect to the real and imaginary parts of `object`,
/// returned as `(dL/dRe, dL/dIm)`.
pub fn backward_measure(object: &ComplexField, set: &MeasurementSet, residuals: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let prop = set.propagator()?;
    let fields = propagated_fields(object, set, &prop)?;
    let g = backward_from_fields(&fields, set, &prop, residuals)?;
    Ok((g.iter().map(|v| v.re).collect(), g.iter().map(|v| v.im).collect()))
}
