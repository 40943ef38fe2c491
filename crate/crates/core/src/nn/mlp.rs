use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Hidden-layer nonlinearity. `Sine` computes `sin(ω₀·xW + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    Sine { omega0: f64 },
}

impl Activation {
    fn input_scale(&self) -> f64 {
        match *self {
            Activation::Relu => 1.0,
            Activation::Sine { omega0 } => omega0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    #[default]
    Relu,
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_dim: usize,
    pub hidden_layers: usize,
    pub output_dim: usize,
    pub activation: ActivationKind,
    /// Frequency factor for `sine`; ignored for `relu`.
    pub omega0: f64,
}

impl MlpConfig {
    pub fn activation(&self) -> Activation {
        match self.activation {
            ActivationKind::Relu => Activation::Relu,
            ActivationKind::Sine => Activation::Sine { omega0: self.omega0 },
        }
    }
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            hidden_layers: 4,
            output_dim: 1,
            activation: ActivationKind::Relu,
            omega0: 30.0,
        }
    }
}

/// Affine map `x ↦ xW + b`, with `W` stored `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<F> {
    layers: Vec<Layer<F>>,
    activation: Activation,
    revision: u64,
}

/// Layer inputs and hidden pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    inputs: Vec<Array2<F>>,
    pre: Vec<Array2<F>>,
    revision: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients<F> {
    pub weights: Vec<Array2<F>>,
    pub biases: Vec<Array1<F>>,
}

impl<F: Real> MlpGradients<F> {
    /// Gradient tensors in the same order as [`MlpModel::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[F]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| {
                [
                    w.as_slice().expect("standard layout"),
                    b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }
}

impl<F: Real> MlpModel<F> {
    pub fn new<R: Rng + ?Sized>(config: &MlpConfig, input_dim: usize, rng: &mut R) -> Result<Self> {
        if input_dim < 1 || config.output_dim < 1 || config.hidden_dim < 1 {
            return Err(Error::InvalidConfig("network widths must be at least 1".into()));
        }
        let activation = config.activation();
        if let Activation::Sine { omega0 } = activation {
            if !(omega0 > 0.0) {
                return Err(Error::InvalidConfig(format!("omega0 {omega0} must be positive")));
            }
        }
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(config.hidden_dim, config.hidden_layers));
        dims.push(config.output_dim);
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let fin = fan_in as f64;
                let w_bound = match (activation, i) {
                    (_, i) if i == n - 1 => (1.0 / fin).sqrt(),
                    (Activation::Relu, _) => (6.0 / fin).sqrt(),
                    (Activation::Sine { .. }, 0) => 1.0 / fin,
                    (Activation::Sine { omega0 }, _) => (6.0 / fin).sqrt() / omega0,
                };
                let b_bound = (1.0 / fin).sqrt();
                let wd = Uniform::new_inclusive(-w_bound, w_bound).expect("finite bound");
                let bd = Uniform::new_inclusive(-b_bound, b_bound).expect("finite bound");
                Layer {
                    weight: Array2::from_shape_simple_fn((fan_in, fan_out), || F::of(wd.sample(rng))),
                    bias: Array1::from_shape_simple_fn(fan_out, || F::of(bd.sample(rng))),
                }
            })
            .collect();
        Ok(Self {
            layers,
            activation,
            revision: 0,
        })
    }

    pub fn from_layers(layers: Vec<Layer<F>>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.ncols() {
                return Err(Error::Shape {
                    expected: l.weight.ncols(),
                    actual: l.bias.len(),
                });
            }
            if let Some(next) = layers.get(i + 1) {
                if next.weight.nrows() != l.weight.ncols() {
                    return Err(Error::Shape {
                        expected: l.weight.ncols(),
                        actual: next.weight.nrows(),
                    });
                }
            }
        }
        // keep the standard layout the slice accessors rely on
        let layers = layers
            .into_iter()
            .map(|l| Layer {
                weight: l.weight.as_standard_layout().into_owned(),
                bias: l.bias.as_standard_layout().into_owned(),
            })
            .collect();
        Ok(Self {
            layers,
            activation,
            revision: 0,
        })
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.ncols()
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.weight.ncols()));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Mutable parameter tensors `W₀, b₀, W₁, b₁, …`. Bumps the revision, so
    /// caches from earlier forward passes become stale.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [F]> {
        self.revision += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[F]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn zero_grads(&self) -> MlpGradients<F> {
        MlpGradients {
            weights: self.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            biases: self.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    fn check_input(&self, x: &ArrayView2<F>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// Predictions without keeping intermediate activations.
    pub fn predict(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        self.check_input(&x)?;
        let scale = F::of(self.activation.input_scale());
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut u = h.dot(&layer.weight);
            if i < last {
                self.apply_hidden(&mut u, &layer.bias, scale);
            } else {
                u += &layer.bias;
            }
            h = u;
        }
        Ok(h)
    }

    fn apply_hidden(&self, u: &mut Array2<F>, bias: &Array1<F>, scale: F) {
        match self.activation {
            Activation::Relu => {
                *u += bias;
                u.mapv_inplace(|v| v.max(F::zero()));
            }
            Activation::Sine { .. } => {
                *u *= scale;
                *u += bias;
                u.mapv_inplace(F::sin);
            }
        }
    }

    pub fn forward(&self, x: ArrayView2<F>) -> Result<(Array2<F>, ForwardCache<F>)> {
        self.check_input(&x)?;
        let scale = F::of(self.activation.input_scale());
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut u = h.dot(&layer.weight);
            inputs.push(h);
            if i < last {
                if let Activation::Sine { .. } = self.activation {
                    u *= scale;
                }
                u += &layer.bias;
                let act = match self.activation {
                    Activation::Relu => u.mapv(|v| v.max(F::zero())),
                    Activation::Sine { .. } => u.mapv(F::sin),
                };
                pre.push(u);
                h = act;
            } else {
                u += &layer.bias;
                h = u;
            }
        }
        Ok((
            h,
            ForwardCache {
                inputs,
                pre,
                revision: self.revision,
            },
        ))
    }

    /// Reverse pass: parameter gradients and gradients of the input features.
    pub fn backward(&self, cache: &ForwardCache<F>, loss_grad: ArrayView2<F>) -> Result<(MlpGradients<F>, Array2<F>)> {
        if cache.revision != self.revision || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache {
                cache: cache.revision,
                model: self.revision,
            });
        }
        let batch = cache.inputs[0].nrows();
        if loss_grad.dim() != (batch, self.output_dim()) {
            return Err(Error::Shape {
                expected: batch * self.output_dim(),
                actual: loss_grad.len(),
            });
        }
        let scale = F::of(self.activation.input_scale());
        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut delta = loss_grad.to_owned();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            if i < n - 1 {
                // through the activation: delta is dL/d(activation output)
                let u = &cache.pre[i];
                match self.activation {
                    Activation::Relu => delta.zip_mut_with(u, |d, &u| {
                        if u <= F::zero() {
                            *d = F::zero();
                        }
                    }),
                    Activation::Sine { .. } => delta.zip_mut_with(u, |d, &u| *d *= u.cos()),
                }
                biases.push(delta.sum_axis(Axis(0)));
                let mut dw = cache.inputs[i].t().dot(&delta);
                if let Activation::Sine { .. } = self.activation {
                    dw *= scale;
                    delta *= scale;
                }
                weights.push(dw);
            } else {
                biases.push(delta.sum_axis(Axis(0)));
                weights.push(cache.inputs[i].t().dot(&delta));
            }
            delta = delta.dot(&layer.weight.t());
        }
        weights.reverse();
        biases.reverse();
        // transposed products may come back column-major
        let weights = weights
            .into_iter()
            .map(|w| {
                if w.is_standard_layout() {
                    w
                } else {
                    w.as_standard_layout().into_owned()
                }
            })
            .collect();
        Ok((MlpGradients { weights, biases }, delta))
    }

    /// Copies parameters from `other` into `self` in another precision.
    pub fn cast<G: Real>(&self) -> MlpModel<G> {
        MlpModel {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.mapv(|v| G::of(v.f64())),
                    bias: l.bias.mapv(|v| G::of(v.f64())),
                })
                .collect(),
            activation: self.activation,
            revision: 0,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}
