use num_complex::Complex64;

use super::{backward_from_fields, propagated_fields, ComplexField, MeasurementSet, Propagator};
use crate::error::{DinerError, Result};
use crate::math::{DenseMatrix, Real};
use crate::model::{train_with_objective, CoordinateModel, Evaluation, MetricsLog, Objective, TrainConfig};
use crate::signal::psnr_from_mse;

/// How the two model outputs describe the complex object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parameterization {
    /// `O = p0 + i p1`.
    #[default]
    RealImag,
    /// `O = p0 exp(i p1)`; the phase output is unwrapped, so large phase
    /// excursions can trap the optimizer.
    AmpPhase,
}

impl Parameterization {
    fn object(&self, p0: f64, p1: f64) -> Complex64 {
        match self {
            Parameterization::RealImag => Complex64::new(p0, p1),
            Parameterization::AmpPhase => Complex64::from_polar(p0, p1),
        }
    }

    /// Chain rule from `g = dL/dRe(O) + i dL/dIm(O)` to the two outputs.
    fn output_grad(&self, p0: f64, p1: f64, g: Complex64) -> (f64, f64) {
        match self {
            Parameterization::RealImag => (g.re, g.im),
            Parameterization::AmpPhase => {
                let r = g * Complex64::from_polar(1.0, -p1);
                (r.re, p0 * r.im)
            }
        }
    }
}

/// Mean squared error between predicted and recorded intensities over all
/// planes. Evaluation couples every element, so it needs full batches.
#[derive(Debug)]
pub struct MeasurementObjective {
    set: MeasurementSet,
    prop: Propagator,
    param: Parameterization,
}

impl MeasurementObjective {
    pub fn new(set: MeasurementSet, param: Parameterization) -> Result<Self> {
        let prop = set.propagator()?;
        Ok(Self { set, prop, param })
    }

    pub fn set(&self) -> &MeasurementSet {
        &self.set
    }

    /// Object described by a `2 x N` prediction whose column `c` belongs to element `indices[c]`.
    pub fn object<T: Real>(&self, indices: &[usize], prediction: &DenseMatrix<T>) -> Result<ComplexField> {
        let n = self.set.illumination.len();
        if prediction.rows() != 2 || prediction.cols() != indices.len() {
            return Err(DinerError::dims("lensless prediction", format!("2x{}", indices.len()), prediction.shape_str()));
        }
        if indices.len() != n {
            return Err(DinerError::Validation(format!(
                "the measurement objective needs all {n} elements per step, got {}",
                indices.len()
            )));
        }
        let mut values = vec![Complex64::new(f64::NAN, 0.0); n];
        let mut seen = vec![false; n];
        for (c, &i) in indices.iter().enumerate() {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(DinerError::Validation(format!("element {i} is missing or repeated in the batch")));
            }
            values[i] = self.param.object(prediction.get(0, c).as_f64(), prediction.get(1, c).as_f64());
        }
        self.set.illumination.with_values(values)
    }

    /// Object currently represented by `model`.
    pub fn reconstruct<T: Real, M: CoordinateModel<T> + ?Sized>(&self, model: &M) -> Result<ComplexField> {
        let all: Vec<usize> = (0..model.len()).collect();
        self.object(&all, &model.predict(&all)?)
    }

    /// Predicted intensities for an object.
    pub fn measure(&self, object: &ComplexField) -> Result<Vec<Vec<f64>>> {
        Ok(propagated_fields(object, &self.set, &self.prop)?
            .into_iter()
            .map(|u| u.iter().map(|v| v.norm_sqr()).collect())
            .collect())
    }
}

impl<T: Real> Objective<T> for MeasurementObjective {
    fn len(&self) -> usize {
        self.set.illumination.len()
    }

    fn d_out(&self) -> usize {
        2
    }

    fn evaluate(&mut self, indices: &[usize], prediction: &DenseMatrix<T>) -> Result<Evaluation<T>> {
        let object = self.object(indices, prediction)?;
        let fields = propagated_fields(&object, &self.set, &self.prop)?;
        let count = (fields.len() * object.len()) as f64;
        let mut sum = 0.0;
        let residuals: Vec<Vec<f64>> = fields
            .iter()
            .zip(&self.set.intensities)
            .map(|(u, m)| {
                u.iter()
                    .zip(m)
                    .map(|(u, &m)| {
                        let d = u.norm_sqr() - m;
                        sum += d * d;
                        2.0 * d / count
                    })
                    .collect()
            })
            .collect();
        let g = backward_from_fields(&fields, &self.set, &self.prop, &residuals)?;
        let mut grad = DenseMatrix::zeros(2, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            let (g0, g1) = self.param.output_grad(prediction.get(0, c).as_f64(), prediction.get(1, c).as_f64(), g[i]);
            grad.set(0, c, T::of(g0));
            grad.set(1, c, T::of(g1));
        }
        Ok(Evaluation {
            loss: T::of(sum / count),
            grad,
        })
    }

    /// PSNR with the largest recorded intensity as peak.
    fn psnr_db(&self, loss: f64) -> f64 {
        let peak = self.set.peak();
        psnr_from_mse(loss / (peak * peak))
    }
}

/// Recovers the complex object from multi-height intensities by training
/// `model` (two outputs) through the forward model.
pub fn solve_phase<T: Real, M: CoordinateModel<T> + ?Sized>(
    set: &MeasurementSet,
    model: &mut M,
    cfg: &TrainConfig,
    param: Parameterization,
) -> Result<(ComplexField, MetricsLog)> {
    if model.len() != set.illumination.len() {
        return Err(DinerError::Binding {
            expected: model.len(),
            actual: set.illumination.len(),
        });
    }
    if model.d_out() != 2 {
        return Err(DinerError::dims("solve_phase", "2 outputs", format!("{} outputs", model.d_out())));
    }
    if cfg.batch_size != 0 && cfg.batch_size != model.len() {
        return Err(DinerError::Validation("phase retrieval trains on full batches only".into()));
    }
    let mut objective = MeasurementObjective::new(set.clone(), param)?;
    let log = train_with_objective(model, &mut objective, cfg)?;
    Ok((objective.reconstruct(model)?, log))
}

/// PSNR of reconstructed against true amplitudes for a peak of 1.
pub fn amplitude_psnr(reconstruction: &ComplexField, truth: &ComplexField) -> Result<f64> {
    reconstruction.check_same_grid(truth, "amplitude_psnr")?;
    let (a, b) = (reconstruction.amplitude(), truth.amplitude());
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    Ok(psnr_from_mse(mse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::HashInit;
    use crate::lensless::{forward_measure, Illumination};
    use crate::model::{BackboneConfig, DinerModel};
    use crate::rng::{substream, Stream};
    use rand::Rng;

    const WL: f64 = 532e-9;
    const PITCH: f64 = 2e-6;

    fn random_set(h: usize, w: usize) -> MeasurementSet {
        let mut rng = substream(5, Stream::Synthetic);
        let planes = (0..2).map(|_| (0..h * w).map(|_| rng.gen_range(0.0..1.5)).collect()).collect();
        let p = Illumination::Gaussian { sigma: 3.0 }.field(h, w, PITCH, WL).unwrap();
        MeasurementSet::new(vec![3e-4, 8e-4], planes, Illumination::Gaussian { sigma: 3.0 }, p).unwrap()
    }

    fn check_output_gradient(param: Parameterization) {
        let (h, w) = (6, 6);
        let mut obj = MeasurementObjective::new(random_set(h, w), param).unwrap();
        let mut rng = substream(6, Stream::Synthetic);
        let pred = DenseMatrix::from_fn(2, h * w, |_, _| rng.gen_range(-1.0..1.0));
        let idx: Vec<usize> = (0..h * w).rev().collect();
        let ev = <MeasurementObjective as Objective<f64>>::evaluate(&mut obj, &idx, &pred).unwrap();
        let step = 1e-6;
        for c in 0..h * w {
            for r in 0..2 {
                let mut plus = pred.clone();
                let mut minus = pred.clone();
                plus.set(r, c, pred.get(r, c) + step);
                minus.set(r, c, pred.get(r, c) - step);
                let lp = <MeasurementObjective as Objective<f64>>::evaluate(&mut obj, &idx, &plus).unwrap().loss;
                let lm = <MeasurementObjective as Objective<f64>>::evaluate(&mut obj, &idx, &minus).unwrap().loss;
                let fd = (lp - lm) / (2.0 * step);
                let a = ev.grad.get(r, c);
                assert!((a - fd).abs() <= 1e-4 * a.abs().max(fd.abs()).max(1e-4), "{param:?} ({r},{c}): {a} vs {fd}");
            }
        }
    }

    #[test]
    fn real_imag_gradient() {
        check_output_gradient(Parameterization::RealImag);
    }

    #[test]
    fn amplitude_phase_gradient() {
        check_output_gradient(Parameterization::AmpPhase);
    }

    #[test]
    fn partial_batches_are_rejected() {
        let mut obj = MeasurementObjective::new(random_set(4, 4), Parameterization::RealImag).unwrap();
        let pred = DenseMatrix::<f64>::zeros(2, 3);
        assert!(Objective::<f64>::evaluate(&mut obj, &[0, 1, 2], &pred).is_err());
        let pred = DenseMatrix::<f64>::zeros(2, 16);
        let mut dup: Vec<usize> = (0..16).collect();
        dup[3] = 4;
        assert!(Objective::<f64>::evaluate(&mut obj, &dup, &pred).is_err());
    }

    #[test]
    fn matched_constant_object_is_recovered_quickly() {
        let (h, w) = (8, 8);
        let p = Illumination::Uniform.field(h, w, PITCH, WL).unwrap();
        let template = MeasurementSet::template(vec![5e-4, 1e-3], Illumination::Uniform, p.clone()).unwrap();
        let truth = ComplexField::filled(h, w, PITCH, WL, Complex64::new(1.0, 0.0)).unwrap();
        let set = MeasurementSet::new(template.distances.clone(), forward_measure(&truth, &template).unwrap(), Illumination::Uniform, p).unwrap();
        let mut model = DinerModel::<f64>::new(h * w, 2, 2, &BackboneConfig::default(), HashInit::Zeros, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            lr_net: 1e-2,
            lr_hash: 1e-2,
            record_time: false,
            ..TrainConfig::default()
        };
        let (_, log) = solve_phase(&set, &mut model, &cfg, Parameterization::RealImag).unwrap();
        assert!(log.last().unwrap().psnr_db >= 60.0, "{:?}", log.last());
    }
}
