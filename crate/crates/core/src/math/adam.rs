use super::{DenseMatrix, Real};
use crate::error::{DinerError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(DinerError::Validation(format!("invalid Adam parameters {self:?}")))
        }
    }
}

/// Bias-corrected Adam update of one contiguous block sharing a step count.
///
/// `step` is the count *after* this update (>= 1).
#[inline]
pub(crate) fn adam_update<T: Real>(
    param: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    hp: &AdamParams,
) {
    let b1 = T::of(hp.beta1);
    let b2 = T::of(hp.beta2);
    let one = T::one();
    let t = step.min(i32::MAX as u64) as i32;
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = T::of(hp.lr);
    let eps = T::of(hp.eps);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let mhat = m[i] / c1;
        let vhat = v[i] / c2;
        param[i] = param[i] - lr * mhat / (vhat.sqrt() + eps);
    }
}

/// Optimizer state for one dense parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f64> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub params: AdamParams,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize, params: AdamParams) -> Self {
        Self {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
            params,
        }
    }

    /// Applies one update. `label` names the parameter block in errors.
    pub fn step(&mut self, param: &mut DenseMatrix<T>, grad: &DenseMatrix<T>, label: &str) -> Result<()> {
        if param.shape() != grad.shape() || self.first_moment.len() != param.data().len() {
            return Err(DinerError::dims(
                "adam_step",
                format!("{label} param {}", param.shape_str()),
                format!("grad {}", grad.shape_str()),
            ));
        }
        if !grad.all_finite() {
            return Err(DinerError::Numeric {
                context: format!("gradient of {label}"),
            });
        }
        self.step_count += 1;
        adam_update(
            param.data_mut(),
            grad.data(),
            &mut self.first_moment,
            &mut self.second_moment,
            self.step_count,
            &self.params,
        );
        Ok(())
    }
}
