//! Coordinate network: optional Fourier features, activated hidden layers and a
//! linear output layer, with exact reverse-mode gradients.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::encoding::PositionalEncoding;
use crate::error::{DinerError, Result};
use crate::math::{
    linear_backward, linear_forward, Activation, AdamParams, AdamState, DenseMatrix, Real,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackboneKind {
    /// ReLU hidden layers.
    Mlp,
    /// Sine hidden layers with frequency `omega0`.
    Siren { omega0: f64 },
}

impl BackboneKind {
    pub fn siren() -> Self {
        BackboneKind::Siren { omega0: 30.0 }
    }

    fn hidden_activation(&self) -> Activation {
        match *self {
            BackboneKind::Mlp => Activation::Relu,
            BackboneKind::Siren { omega0 } => Activation::Sine { omega0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneConfig {
    pub kind: BackboneKind,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub encoding: PositionalEncoding,
}

impl Default for BackboneConfig {
    /// `2 x 64` ReLU network on raw inputs.
    fn default() -> Self {
        Self {
            kind: BackboneKind::Mlp,
            hidden_layers: 2,
            hidden_width: 64,
            encoding: PositionalEncoding::identity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T = f64> {
    pub weight: DenseMatrix<T>,
    pub bias: DenseMatrix<T>,
    pub activation: Activation,
    weight_opt: AdamState<T>,
    bias_opt: AdamState<T>,
}

impl<T: Real> Layer<T> {
    pub fn new(weight: DenseMatrix<T>, bias: DenseMatrix<T>, activation: Activation) -> Result<Self> {
        if bias.rows() != weight.rows() || bias.cols() != 1 {
            return Err(DinerError::dims("Layer::new", weight.shape_str(), bias.shape_str()));
        }
        activation.validate()?;
        let weight_opt = AdamState::new(weight.data().len(), AdamParams::default());
        let bias_opt = AdamState::new(bias.data().len(), AdamParams::default());
        Ok(Self {
            weight,
            bias,
            activation,
            weight_opt,
            bias_opt,
        })
    }

    pub fn in_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_width(&self) -> usize {
        self.weight.rows()
    }

    fn reset_optimizer(&mut self, params: AdamParams) {
        self.weight_opt = AdamState::new(self.weight.data().len(), params);
        self.bias_opt = AdamState::new(self.bias.data().len(), params);
    }

    pub fn weight_optimizer(&self) -> &AdamState<T> {
        &self.weight_opt
    }
}

/// Values kept from the forward pass of one layer.
#[derive(Debug, Clone)]
pub struct LayerCache<T = f64> {
    pub pre_activation: DenseMatrix<T>,
    pub post_activation: DenseMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace<T = f64> {
    pub input: DenseMatrix<T>,
    pub encoded: DenseMatrix<T>,
    pub layers: Vec<LayerCache<T>>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn output(&self) -> &DenseMatrix<T> {
        &self.layers.last().expect("backbone has at least one layer").post_activation
    }

    /// First layer whose output contains a non-finite value.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers.iter().position(|c| !c.post_activation.all_finite())
    }
}

#[derive(Debug, Clone)]
pub struct BackboneGrads<T = f64> {
    /// `(dW, db)` per layer.
    pub layers: Vec<(DenseMatrix<T>, DenseMatrix<T>)>,
    /// Gradient with respect to the raw (pre-encoding) input.
    pub input: Option<DenseMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone<T = f64> {
    encoding: PositionalEncoding,
    input_width: usize,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Backbone<T> {
    /// Randomly initialized network.
    ///
    /// ReLU layers draw weights and biases from `U(+-1/sqrt(fan_in))`. Sine
    /// networks use `U(+-1/fan_in)` for the first layer and
    /// `U(+-sqrt(6/fan_in)/omega0)` afterwards, biases `U(+-1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(
        config: &BackboneConfig,
        input_width: usize,
        output_width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_width == 0 || output_width == 0 {
            return Err(DinerError::Validation("backbone widths must be positive".into()));
        }
        if config.hidden_layers > 0 && config.hidden_width == 0 {
            return Err(DinerError::Validation("hidden width must be positive".into()));
        }
        config.encoding.validate()?;
        let act = config.kind.hidden_activation();
        act.validate()?;

        let mut widths = vec![config.encoding.output_dim(input_width)];
        widths.extend(std::iter::repeat_n(config.hidden_width, config.hidden_layers));
        widths.push(output_width);

        let mut layers = Vec::with_capacity(widths.len() - 1);
        for j in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[j], widths[j + 1]);
            let last = j + 2 == widths.len();
            let w_bound = match config.kind {
                BackboneKind::Mlp => 1.0 / (fan_in as f64).sqrt(),
                BackboneKind::Siren { .. } if j == 0 => 1.0 / fan_in as f64,
                BackboneKind::Siren { omega0 } => (6.0 / fan_in as f64).sqrt() / omega0,
            };
            let b_bound = 1.0 / (fan_in as f64).sqrt();
            let wd = Uniform::new_inclusive(-w_bound, w_bound);
            let bd = Uniform::new_inclusive(-b_bound, b_bound);
            let weight = DenseMatrix::from_fn(fan_out, fan_in, |_, _| T::of(wd.sample(rng)));
            let bias = DenseMatrix::from_fn(fan_out, 1, |_, _| T::of(bd.sample(rng)));
            let activation = if last { Activation::Identity } else { act };
            layers.push(Layer::new(weight, bias, activation)?);
        }
        Ok(Self {
            encoding: config.encoding,
            input_width,
            layers,
        })
    }

    /// Network from explicit layers. The last layer should be linear.
    pub fn from_layers(encoding: PositionalEncoding, input_width: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(DinerError::Validation("backbone needs at least one layer".into()));
        }
        encoding.validate()?;
        let mut width = encoding.output_dim(input_width);
        for (j, l) in layers.iter().enumerate() {
            if l.in_width() != width {
                return Err(DinerError::dims(
                    "Backbone::from_layers",
                    format!("layer {j} input {}", l.in_width()),
                    format!("previous width {width}"),
                ));
            }
            width = l.out_width();
        }
        Ok(Self {
            encoding,
            input_width,
            layers,
        })
    }

    pub fn encoding(&self) -> PositionalEncoding {
        self.encoding
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(|l| l.out_width()).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.data().len())
            .sum()
    }

    pub fn set_optimizer(&mut self, params: AdamParams) {
        for l in &mut self.layers {
            l.reset_optimizer(params);
        }
    }

    fn check_input(&self, x: &DenseMatrix<T>) -> Result<()> {
        if x.rows() != self.input_width {
            return Err(DinerError::dims(
                "backbone input",
                format!("expected {} rows", self.input_width),
                x.shape_str(),
            ));
        }
        Ok(())
    }

    /// Forward pass without caching intermediates.
    pub fn predict(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.check_input(x)?;
        let mut z = self.encoding.encode(x);
        for l in &self.layers {
            let pre = linear_forward(&l.weight, &l.bias, &z)?;
            z = match l.activation {
                Activation::Identity => pre,
                a => pre.map(|v| a.apply_scalar(v)),
            };
        }
        Ok(z)
    }

    pub fn forward(&self, x: &DenseMatrix<T>) -> Result<ForwardTrace<T>> {
        self.check_input(x)?;
        let encoded = self.encoding.encode(x);
        let mut caches: Vec<LayerCache<T>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = caches.last().map(|c| &c.post_activation).unwrap_or(&encoded);
            let pre = linear_forward(&l.weight, &l.bias, input)?;
            let post = match l.activation {
                Activation::Identity => pre.clone(),
                a => pre.map(|v| a.apply_scalar(v)),
            };
            caches.push(LayerCache {
                pre_activation: pre,
                post_activation: post,
            });
        }
        Ok(ForwardTrace {
            input: x.clone(),
            encoded,
            layers: caches,
        })
    }

    /// Reverse pass through the trace of a matching [`Backbone::forward`].
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        d_out: &DenseMatrix<T>,
        want_input: bool,
    ) -> Result<BackboneGrads<T>> {
        if trace.layers.len() != self.layers.len() {
            return Err(DinerError::Internal(format!(
                "trace has {} layers, network has {}",
                trace.layers.len(),
                self.layers.len()
            )));
        }
        if d_out.shape() != trace.output().shape() {
            return Err(DinerError::Internal(format!(
                "output gradient {} does not match output {}",
                d_out.shape_str(),
                trace.output().shape_str()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = d_out.clone();
        for j in (0..self.layers.len()).rev() {
            let l = &self.layers[j];
            let cache = &trace.layers[j];
            let dz = match l.activation {
                Activation::Identity => upstream,
                a => {
                    let mut dz = upstream;
                    for (g, &p) in dz.data_mut().iter_mut().zip(cache.pre_activation.data()) {
                        *g = *g * a.derivative_scalar(p);
                    }
                    dz
                }
            };
            let input = if j == 0 {
                &trace.encoded
            } else {
                &trace.layers[j - 1].post_activation
            };
            let need_dx = j > 0 || want_input;
            let g = linear_backward(&l.weight, input, &dz, need_dx)?;
            grads.push((g.weight, g.bias));
            upstream = match g.input {
                Some(dx) => dx,
                None => DenseMatrix::zeros(0, 0),
            };
        }
        grads.reverse();
        let input = if want_input {
            Some(self.encoding.backward(&trace.input, &upstream)?)
        } else {
            None
        };
        Ok(BackboneGrads {
            layers: grads,
            input,
        })
    }

    /// One Adam step on every layer.
    pub fn apply_grads(&mut self, grads: &BackboneGrads<T>) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(DinerError::Internal("gradient/layer count mismatch".into()));
        }
        for (j, (l, (dw, db))) in self.layers.iter_mut().zip(&grads.layers).enumerate() {
            l.weight_opt.step(&mut l.weight, dw, &format!("layer {j} weight"))?;
            l.bias_opt.step(&mut l.bias, db, &format!("layer {j} bias"))?;
        }
        Ok(())
    }

    /// Appends `extra` zero-initialized input dimensions.
    ///
    /// New first-layer weight columns are zero, so outputs are unchanged for any
    /// input whose added coordinates are zero.
    pub fn embed_inputs(&mut self, extra: usize) {
        if extra == 0 {
            return;
        }
        let per = self.encoding.features_per_axis();
        let first = &mut self.layers[0];
        let old_cols = first.weight.cols();
        let new_cols = old_cols + extra * per;
        let widen = |src: &[T], rows: usize| {
            let mut out = vec![T::zero(); rows * new_cols];
            for r in 0..rows {
                out[r * new_cols..r * new_cols + old_cols]
                    .copy_from_slice(&src[r * old_cols..(r + 1) * old_cols]);
            }
            out
        };
        let rows = first.weight.rows();
        first.weight = DenseMatrix::from_vec_unchecked(rows, new_cols, widen(first.weight.data(), rows));
        first.weight_opt.first_moment = widen(&first.weight_opt.first_moment, rows);
        first.weight_opt.second_moment = widen(&first.weight_opt.second_moment, rows);
        self.input_width += extra;
    }
}
