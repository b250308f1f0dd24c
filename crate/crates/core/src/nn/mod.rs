//! A small dense feedforward regressor with hand-rolled backprop.
//!
//! Nothing exotic: affine layers, LeakyReLU hidden activations, a linear
//! output, MSE loss. Backward returns gradients for every parameter *and*
//! for the input batch — the mask module needs `d_input` to continue the
//! chain rule through its elementwise product.

mod adam;
mod gradcheck;

pub use adam::{adam_step, AdamParams, OptimizerState};
pub use gradcheck::{gradient_check, DifferentiableLoss, GradCheckReport};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// `x` for `x ≥ 0`, else `alpha·x`.
pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum Activation {
    LeakyRelu(f64),
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(alpha) => leaky_relu(z, alpha),
            Activation::Linear => z,
        }
    }

    /// Derivative with respect to the pre-activation.
    fn slope(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(alpha) => {
                if z >= 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// One affine layer. Weights are `fan_in × fan_out`, so a batch maps
/// forward as `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer inputs and pre-activations kept from a forward pass, enough
/// to run backward without recomputing anything.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input batch to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation `x·W + b` per layer.
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct GradientSet {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
    pub d_input: Array2<f64>,
}

/// Build a network with scaled-uniform weights (half-width
/// `sqrt(6/(fan_in+fan_out))`) and zero biases. Hidden layers get
/// `LeakyRelu(alpha)`, the last layer is linear.
pub fn init_network(layer_sizes: &[usize], alpha: f64, seed: u64) -> Result<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_network_with_rng(layer_sizes, alpha, &mut rng)
}

pub(crate) fn init_network_with_rng(
    layer_sizes: &[usize],
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<Network> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least two layer sizes, got {}",
            layer_sizes.len()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidConfig("layer sizes must be positive".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "activation alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let n_layers = layer_sizes.len() - 1;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let half_width = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Array2::from_shape_fn((fan_in, fan_out), |_| {
            rng.random_range(-half_width..half_width)
        });
        let activation = if l + 1 == n_layers {
            Activation::Linear
        } else {
            Activation::LeakyRelu(alpha)
        };
        layers.push(DenseLayer {
            weights,
            bias: Array1::zeros(fan_out),
            activation,
        });
    }
    Ok(Network { layers })
}

impl Network {
    pub fn input_size(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("nonempty").fan_out()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_size()];
        sizes.extend(self.layers.iter().map(|l| l.fan_out()));
        sizes
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if batch.ncols() != self.input_size() {
            return Err(Error::Shape {
                context: "forward",
                detail: format!(
                    "batch width {} does not match input size {}",
                    batch.ncols(),
                    self.input_size()
                ),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = batch.to_owned();
        for layer in &self.layers {
            let mut z = linalg::matmul(current.view(), layer.weights.view());
            z += &layer.bias;
            inputs.push(current);
            current = z.mapv(|v| layer.activation.apply(v));
            pre.push(z);
        }
        Ok((current, ForwardCache { inputs, pre }))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.forward(batch).map(|(out, _)| out)
    }

    /// Backpropagate `d_predictions` (gradient of the loss with respect to
    /// the network output) through the cached pass.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_predictions: ArrayView2<'_, f64>,
    ) -> Result<GradientSet> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape {
                context: "backward",
                detail: "cache does not match network depth".into(),
            });
        }
        let last_pre = cache.pre.last().expect("nonempty cache");
        if d_predictions.dim() != last_pre.dim() {
            return Err(Error::Shape {
                context: "backward",
                detail: format!(
                    "gradient shape {:?} does not match output shape {:?}",
                    d_predictions.dim(),
                    last_pre.dim()
                ),
            });
        }
        let mut d_weights = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut d_biases = vec![Array1::zeros(0); self.layers.len()];
        let mut upstream = d_predictions.to_owned();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            // dz = upstream ⊙ act'(pre)
            let mut dz = upstream;
            ndarray::Zip::from(&mut dz)
                .and(&cache.pre[l])
                .for_each(|g, &z| *g *= layer.activation.slope(z));
            d_weights[l] = linalg::matmul_tn(cache.inputs[l].view(), dz.view());
            d_biases[l] = dz.sum_axis(Axis(0));
            upstream = linalg::matmul_nt(dz.view(), layer.weights.view());
        }
        Ok(GradientSet {
            d_weights,
            d_biases,
            d_input: upstream,
        })
    }

    /// Flat views of every parameter tensor, weights before bias per layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut slices = Vec::with_capacity(self.layers.len() * 2);
        for layer in &mut self.layers {
            slices.push(layer.weights.as_slice_mut().expect("contiguous"));
            slices.push(layer.bias.as_slice_mut().expect("contiguous"));
        }
        slices
    }

    pub fn param_lengths(&self) -> Vec<usize> {
        let mut lengths = Vec::with_capacity(self.layers.len() * 2);
        for layer in &self.layers {
            lengths.push(layer.weights.len());
            lengths.push(layer.bias.len());
        }
        lengths
    }

    /// Flat gradient slices matching [`Network::param_slices_mut`] order.
    pub fn grad_slices<'a>(&self, grads: &'a GradientSet) -> Vec<&'a [f64]> {
        let mut slices = Vec::with_capacity(self.layers.len() * 2);
        for l in 0..self.layers.len() {
            slices.push(grads.d_weights[l].as_slice().expect("contiguous"));
            slices.push(grads.d_biases[l].as_slice().expect("contiguous"));
        }
        slices
    }

    pub fn to_document(&self) -> NetworkDocument {
        let alpha = self
            .layers
            .iter()
            .find_map(|l| match l.activation {
                Activation::LeakyRelu(a) => Some(a),
                Activation::Linear => None,
            })
            .unwrap_or(0.0);
        NetworkDocument {
            version: "1".into(),
            layer_sizes: self.layer_sizes(),
            alpha,
            weights: self
                .layers
                .iter()
                .map(|l| l.weights.iter().copied().collect())
                .collect(),
            biases: self.layers.iter().map(|l| l.bias.to_vec()).collect(),
        }
    }

    pub fn from_document(doc: &NetworkDocument) -> Result<Network> {
        if doc.version != "1" {
            return Err(Error::SchemaMismatch {
                detail: format!("unsupported model version {:?}", doc.version),
            });
        }
        let n_layers = doc.layer_sizes.len().saturating_sub(1);
        if n_layers == 0 || doc.weights.len() != n_layers || doc.biases.len() != n_layers {
            return Err(Error::SchemaMismatch {
                detail: "model document arrays do not match layer_sizes".into(),
            });
        }
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (doc.layer_sizes[l], doc.layer_sizes[l + 1]);
            let weights = Array2::from_shape_vec((fan_in, fan_out), doc.weights[l].clone())
                .map_err(|_| Error::SchemaMismatch {
                    detail: format!("layer {l} weight array has the wrong length"),
                })?;
            if doc.biases[l].len() != fan_out {
                return Err(Error::SchemaMismatch {
                    detail: format!("layer {l} bias array has the wrong length"),
                });
            }
            let activation = if l + 1 == n_layers {
                Activation::Linear
            } else {
                Activation::LeakyRelu(doc.alpha)
            };
            layers.push(DenseLayer {
                weights,
                bias: Array1::from_vec(doc.biases[l].clone()),
                activation,
            });
        }
        Ok(Network { layers })
    }
}

/// Serialized form: layer sizes, activation alpha, row-major parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub version: String,
    pub layer_sizes: Vec<usize>,
    pub alpha: f64,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Mean squared error over all entries plus its gradient:
/// `loss = Σ(ŷ−y)²/(m·q)`, `d_pred = 2(ŷ−y)/(m·q)`.
pub fn mse_loss(
    predictions: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>)> {
    if predictions.dim() != targets.dim() {
        return Err(Error::Shape {
            context: "mse_loss",
            detail: format!(
                "predictions {:?} vs targets {:?}",
                predictions.dim(),
                targets.dim()
            ),
        });
    }
    let (m, q) = predictions.dim();
    if m == 0 {
        return Err(Error::Shape {
            context: "mse_loss",
            detail: "empty batch".into(),
        });
    }
    let scale = 1.0 / (m * q) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((m, q));
    ndarray::Zip::from(&mut grad)
        .and(&predictions)
        .and(&targets)
        .for_each(|g, &p, &t| {
            let d = p - t;
            loss += d * d * scale;
            *g = 2.0 * d * scale;
        });
    Ok((loss, grad))
}
