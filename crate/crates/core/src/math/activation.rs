use super::{DenseMatrix, Real};
use crate::error::{DinerError, Result};

/// Element-wise nonlinearity applied after a hidden layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    /// `sin(omega0 * x)`.
    Sine { omega0: f64 },
}

impl Activation {
    pub fn sine(omega0: f64) -> Self {
        Activation::Sine { omega0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Sine { omega0 } if !(omega0 > 0.0 && omega0.is_finite()) => Err(
                DinerError::Validation(format!("sine frequency must be positive, got {omega0}")),
            ),
            _ => Ok(()),
        }
    }

    /// Stable tag used by the checkpoint format.
    pub fn tag(&self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sine { .. } => 2,
        }
    }

    pub fn omega0(&self) -> f64 {
        match *self {
            Activation::Sine { omega0 } => omega0,
            _ => 0.0,
        }
    }

    pub fn from_tag(tag: u8, omega0: f64) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sine { omega0 }),
            _ => None,
        }
    }

    #[inline]
    pub fn apply_scalar<T: Real>(&self, x: T) -> T {
        match *self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Sine { omega0 } => (T::of(omega0) * x).sin(),
        }
    }

    /// Derivative at pre-activation `x`. ReLU uses 0 at exactly 0.
    #[inline]
    pub fn derivative_scalar<T: Real>(&self, x: T) -> T {
        match *self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sine { omega0 } => {
                let w = T::of(omega0);
                w * (w * x).cos()
            }
        }
    }

    pub fn apply<T: Real>(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if !x.all_finite() {
            return Err(DinerError::Numeric {
                context: "activation input".into(),
            });
        }
        Ok(x.map(|v| self.apply_scalar(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn relu_values() {
        assert_eq!(Activation::Relu.apply_scalar(-2.0), 0.0);
        assert_eq!(Activation::Relu.apply_scalar(2.0), 2.0);
        assert_eq!(Activation::Relu.derivative_scalar(0.0), 0.0);
    }

    #[test]
    fn sine_values() {
        let s = Activation::sine(30.0);
        assert_eq!(s.apply_scalar(0.0), 0.0);
        assert!((s.apply_scalar(PI / 60.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let x = DenseMatrix::from_vec_unchecked(1, 1, vec![f64::INFINITY]);
        assert!(Activation::Identity.apply(&x).is_err());
        assert!(Activation::sine(0.0).validate().is_err());
    }
}
