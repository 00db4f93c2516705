//! 2D discrete Fourier analysis and radial band-energy ratios.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{DinerError, Result};
use crate::signal::GridSignal;

/// Planned row/column transforms for one `height x width` plane.
pub struct Fft2 {
    height: usize,
    width: usize,
    rows: [Arc<dyn Fft<f64>>; 2],
    cols: [Arc<dyn Fft<f64>>; 2],
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.height, self.width)
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(DinerError::EmptySignal);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            height,
            width,
            rows: [planner.plan_fft_forward(width), planner.plan_fft_inverse(width)],
            cols: [planner.plan_fft_forward(height), planner.plan_fft_inverse(height)],
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn run(&self, data: &mut [Complex64], dir: usize) -> Result<()> {
        let (h, w) = (self.height, self.width);
        if data.len() != h * w {
            return Err(DinerError::dims("fft2", format!("{h}x{w}"), format!("{} values", data.len())));
        }
        self.rows[dir].process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                col[y] = data[y * w + x];
            }
            self.cols[dir].process(&mut col);
            for y in 0..h {
                data[y * w + x] = col[y];
            }
        }
        Ok(())
    }

    /// Unnormalized forward transform, in place, row-major.
    pub fn forward(&self, data: &mut [Complex64]) -> Result<()> {
        self.run(data, 0)
    }

    /// Inverse transform including the `1 / (height * width)` factor.
    pub fn inverse(&self, data: &mut [Complex64]) -> Result<()> {
        self.run(data, 1)?;
        let s = 1.0 / (self.height * self.width) as f64;
        data.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }
}

/// DC-centred 2D spectrum: the coefficient for integer frequency `(ky, kx)`
/// sits at row `ky + height / 2`, column `kx + width / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    height: usize,
    width: usize,
    coeffs: Vec<Complex64>,
}

impl Spectrum2D {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.coeffs[row * self.width + col]
    }

    /// Normalized frequency `(ky / height, kx / width)` of a centred position.
    pub fn frequency(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (row as f64 - (self.height / 2) as f64) / self.height as f64,
            (col as f64 - (self.width / 2) as f64) / self.width as f64,
        )
    }

    /// `|F|^2` per coefficient.
    pub fn power(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.power().iter().sum()
    }
}

/// Centred DFT of a row-major real plane.
pub fn dft2(plane: &[f64], height: usize, width: usize) -> Result<Spectrum2D> {
    if plane.is_empty() || height * width == 0 {
        return Err(DinerError::EmptySignal);
    }
    if plane.len() != height * width {
        return Err(DinerError::dims("dft2", format!("{height}x{width}"), format!("{} values", plane.len())));
    }
    let mut data: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::new(height, width)?.forward(&mut data)?;
    let (ch, cw) = (height / 2, width / 2);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); height * width];
    for y in 0..height {
        for x in 0..width {
            coeffs[((y + ch) % height) * width + (x + cw) % width] = data[y * width + x];
        }
    }
    Ok(Spectrum2D { height, width, coeffs })
}

/// Spectrum of channel `channel` of a 2D signal.
pub fn dft2_channel(signal: &GridSignal, channel: usize) -> Result<Spectrum2D> {
    let (h, w) = plane_shape(signal)?;
    if channel >= signal.d_out() {
        return Err(DinerError::Index {
            axis: 1,
            value: channel,
            extent: signal.d_out(),
        });
    }
    dft2(&signal.channel(channel), h, w)
}

fn plane_shape(signal: &GridSignal) -> Result<(usize, usize)> {
    match signal.dims() {
        &[h, w] => Ok((h, w)),
        d => Err(DinerError::Validation(format!("spectral analysis needs a 2D grid, got {d:?}"))),
    }
}

/// Fraction of `|F|^2` in each of `n_bands` equal-width annuli of normalized
/// radial frequency `r = |f| / max |f|`; DC is in band 0 and `r = 1` in the
/// last band. A plane with no energy reports everything at DC.
pub fn band_ratios(spec: &Spectrum2D, n_bands: usize) -> Result<Vec<f64>> {
    if n_bands == 0 {
        return Err(DinerError::Validation("at least one band is required".into()));
    }
    let (h, w) = (spec.height, spec.width);
    let mut max_r = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let (fy, fx) = spec.frequency(y, x);
            max_r = max_r.max(fy.hypot(fx));
        }
    }
    let mut bands = vec![0.0; n_bands];
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (fy, fx) = spec.frequency(y, x);
            let r = if max_r > 0.0 { fy.hypot(fx) / max_r } else { 0.0 };
            let k = ((r * n_bands as f64) as usize).min(n_bands - 1);
            let p = spec.at(y, x).norm_sqr();
            bands[k] += p;
            total += p;
        }
    }
    if total == 0.0 {
        bands.iter_mut().for_each(|b| *b = 0.0);
        bands[0] = 1.0;
    } else {
        bands.iter_mut().for_each(|b| *b /= total);
    }
    Ok(bands)
}

/// Band ratios of a 2D signal, averaged over channels.
pub fn signal_band_ratios(signal: &GridSignal, n_bands: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; n_bands.max(1)];
    for c in 0..signal.d_out() {
        for (a, r) in acc.iter_mut().zip(band_ratios(&dft2_channel(signal, c)?, n_bands)?) {
            *a += r;
        }
    }
    acc.iter_mut().for_each(|a| *a /= signal.d_out() as f64);
    Ok(acc)
}

/// `f_y,f_x,power` rows with `power = |F|^2`, in centred row-major order.
pub fn spectrum_csv(spec: &Spectrum2D) -> String {
    let mut out = String::from("f_y,f_x,power\n");
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (fy, fx) = spec.frequency(y, x);
            let _ = writeln!(out, "{fy},{fx},{}", spec.at(y, x).norm_sqr());
        }
    }
    out
}

/// Header plus one record: `band_0,...,band_{n-1}`.
pub fn band_ratios_csv(ratios: &[f64]) -> String {
    let header: Vec<String> = (0..ratios.len()).map(|k| format!("band_{k}")).collect();
    let values: Vec<String> = ratios.iter().map(|r| r.to_string()).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

pub fn write_spectrum_csv(spec: &Spectrum2D, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, spectrum_csv(spec))?;
    Ok(())
}
