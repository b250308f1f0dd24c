//! The learnable feature mask and its joint training loop.
//!
//! A batch is summarized by its column means μ; an affine map plus
//! temperature-softmax turns μ into a mask on the probability simplex;
//! the mask multiplies the batch elementwise before it enters the
//! regression network. Both parameter sets train jointly against MSE, so
//! mask weight migrates toward columns the network can actually use.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::linalg;
use crate::nn::{
    adam_step, init_network_with_rng, mse_loss, AdamParams, DifferentiableLoss, GradientSet,
    Network, OptimizerState,
};

/// Training hyperparameters shared by every stack run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamParams::default();
        TrainConfig {
            batch_size: 256,
            epochs: 30,
            seed: 0,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }

    fn adam(&self) -> AdamParams {
        AdamParams {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Architecture knobs for [`LearnerStack::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackOptions {
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub temperature: f64,
    /// Multiply the applied mask by d so the average column keeps unit
    /// scale. Off by default; the net's first layer absorbs the 1/d
    /// attenuation on its own.
    pub scale_by_dim: bool,
}

impl Default for StackOptions {
    fn default() -> Self {
        StackOptions {
            hidden: vec![64, 32],
            alpha: 0.02,
            temperature: 0.5,
            scale_by_dim: false,
        }
    }
}

/// Affine map on the batch mean followed by a temperature softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGenerator {
    pub wm: Array2<f64>,
    pub bm: Array1<f64>,
    pub temperature: f64,
}

/// μ and logits kept from [`MaskGenerator::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MaskCache {
    pub mu: Array1<f64>,
    pub logits: Array1<f64>,
    pub mask: Array1<f64>,
}

impl MaskGenerator {
    /// Zero-initialized generator: the first mask of any run is uniform.
    pub fn zeros(width: usize, temperature: f64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidConfig("mask width must be positive".into()));
        }
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(MaskGenerator {
            wm: Array2::zeros((width, width)),
            bm: Array1::zeros(width),
            temperature,
        })
    }

    pub fn width(&self) -> usize {
        self.bm.len()
    }

    /// μ = column means, logits = Wm·μ + bm, mask = softmax(logits / T).
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<(Array1<f64>, MaskCache)> {
        if batch.nrows() == 0 {
            return Err(Error::Shape {
                context: "mask_forward",
                detail: "empty batch".into(),
            });
        }
        if batch.ncols() != self.width() {
            return Err(Error::Shape {
                context: "mask_forward",
                detail: format!(
                    "batch width {} does not match generator width {}",
                    batch.ncols(),
                    self.width()
                ),
            });
        }
        let mu = batch.mean_axis(Axis(0)).expect("nonempty batch");
        let mu_col = mu.view().insert_axis(Axis(1));
        let mut logits = linalg::matmul(self.wm.view(), mu_col)
            .index_axis_move(Axis(1), 0);
        logits += &self.bm;
        let mask = softmax(logits.view(), self.temperature);
        Ok((
            mask.clone(),
            MaskCache { mu, logits, mask },
        ))
    }

    /// Backprop `d_mask` (dL/dm) to generator parameters.
    pub fn backward(&self, cache: &MaskCache, d_mask: ArrayView1<'_, f64>) -> (Array2<f64>, Array1<f64>) {
        // Softmax Jacobian: dL/dl_k = (m_k / T)·(g_k − Σ_j g_j·m_j).
        let inner: f64 = d_mask
            .iter()
            .zip(cache.mask.iter())
            .map(|(g, m)| g * m)
            .sum();
        let d_logits: Array1<f64> = cache
            .mask
            .iter()
            .zip(d_mask.iter())
            .map(|(&m, &g)| m / self.temperature * (g - inner))
            .collect();
        // logits = Wm·μ + bm ⇒ dWm = d_logits ⊗ μ, dbm = d_logits.
        let d_wm = Array2::from_shape_fn((self.width(), self.width()), |(i, j)| {
            d_logits[i] * cache.mu[j]
        });
        (d_wm, d_logits)
    }
}

fn softmax(logits: ArrayView1<'_, f64>, temperature: f64) -> Array1<f64> {
    let scaled: Array1<f64> = logits.mapv(|l| l / temperature);
    let max = scaled.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps = scaled.mapv(|l| (l - max).exp());
    let sum = exps.sum();
    exps / sum
}

/// An extracted mask with its variable names attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub m: Vec<f64>,
    pub variable_names: Vec<String>,
}

impl FeatureMask {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn score_of(&self, name: &str) -> Option<f64> {
        self.variable_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.m[i])
    }

    /// Simplex check: all entries ≥ 0 and Σ = 1 within `tol`.
    pub fn on_simplex(&self, tol: f64) -> bool {
        simplex_violation(&self.m) <= tol
    }
}

/// 0 when `m` is a valid mask; otherwise the worst constraint violation
/// (negative mass or deviation of the sum from 1).
pub fn simplex_violation(m: &[f64]) -> f64 {
    let neg = m.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    let sum: f64 = m.iter().sum();
    neg.max((sum - 1.0).abs())
}

/// Multiply each column of `batch` by the matching mask entry.
pub fn apply_mask(batch: ArrayView2<'_, f64>, mask: ArrayView1<'_, f64>) -> Result<Array2<f64>> {
    if batch.ncols() != mask.len() {
        return Err(Error::Shape {
            context: "apply_mask",
            detail: format!(
                "batch width {} does not match mask length {}",
                batch.ncols(),
                mask.len()
            ),
        });
    }
    Ok(&batch * &mask)
}

/// Per-epoch loss record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

/// Snapshot handed to a training observer after each optimizer step.
pub struct IterationEvent<'a> {
    pub epoch: usize,
    pub iteration: usize,
    pub loss: f64,
    /// Mask regenerated from the updated parameters on the step's batch.
    pub mask: ArrayView1<'a, f64>,
}

/// Generator + regression network + optimizer, trained as one unit.
#[derive(Debug, Clone)]
pub struct LearnerStack {
    pub generator: MaskGenerator,
    pub net: Network,
    pub optimizer: OptimizerState,
    pub config: TrainConfig,
    scale_by_dim: bool,
}

/// Gradients for every stack parameter tensor plus the raw input batch.
pub struct StackGradients {
    pub d_wm: Array2<f64>,
    pub d_bm: Array1<f64>,
    pub net: GradientSet,
}

impl LearnerStack {
    /// Assemble a fresh stack for `inputs`-wide data with `outputs` targets.
    pub fn build(
        inputs: usize,
        outputs: usize,
        options: &StackOptions,
        config: TrainConfig,
    ) -> Result<LearnerStack> {
        config.validate()?;
        if outputs == 0 {
            return Err(Error::InvalidConfig("need at least one target".into()));
        }
        let generator = MaskGenerator::zeros(inputs, options.temperature)?;
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(&options.hidden);
        sizes.push(outputs);
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        init_rng.set_stream(0);
        let net = init_network_with_rng(&sizes, options.alpha, &mut init_rng)?;
        let mut lengths = vec![inputs * inputs, inputs];
        lengths.extend(net.param_lengths());
        let optimizer = OptimizerState::new(&lengths, config.adam());
        Ok(LearnerStack {
            generator,
            net,
            optimizer,
            config,
            scale_by_dim: options.scale_by_dim,
        })
    }

    pub fn trained(&self) -> bool {
        self.optimizer.step_count() >= 1
    }

    pub fn n_params(&self) -> usize {
        let d = self.generator.width();
        d * d + d + self.net.n_params()
    }

    fn mask_scale(&self) -> f64 {
        if self.scale_by_dim {
            self.generator.width() as f64
        } else {
            1.0
        }
    }

    /// Loss and full parameter gradient on one batch; shared by the
    /// training loop and the finite-difference checker.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
    ) -> Result<(f64, StackGradients)> {
        let scale = self.mask_scale();
        let (mask, cache) = self.generator.forward(x)?;
        let masked = apply_mask(x, mask.view())? * scale;
        let (pred, net_cache) = self.net.forward(masked.view())?;
        let (loss, d_pred) = mse_loss(pred.view(), y)?;
        let net_grads = self.net.backward(&net_cache, d_pred.view())?;
        // Product rule through masked[i,j] = x[i,j]·m[j]·scale.
        let d_mask: Array1<f64> = (0..x.ncols())
            .map(|j| {
                scale
                    * net_grads
                        .d_input
                        .column(j)
                        .iter()
                        .zip(x.column(j).iter())
                        .map(|(g, v)| g * v)
                        .sum::<f64>()
            })
            .collect();
        let (d_wm, d_bm) = self.generator.backward(&cache, d_mask.view());
        Ok((
            loss,
            StackGradients {
                d_wm,
                d_bm,
                net: net_grads,
            },
        ))
    }

    fn step(&mut self, grads: &StackGradients) -> Result<()> {
        let mut tensors: Vec<&mut [f64]> = Vec::with_capacity(2 + self.net.layers.len() * 2);
        tensors.push(self.generator.wm.as_slice_mut().expect("contiguous"));
        tensors.push(self.generator.bm.as_slice_mut().expect("contiguous"));
        tensors.extend(self.net.param_slices_mut());
        let mut grad_slices: Vec<&[f64]> = Vec::with_capacity(tensors.len());
        grad_slices.push(grads.d_wm.as_slice().expect("contiguous"));
        grad_slices.push(grads.d_bm.as_slice().expect("contiguous"));
        for l in 0..grads.net.d_weights.len() {
            grad_slices.push(grads.net.d_weights[l].as_slice().expect("contiguous"));
            grad_slices.push(grads.net.d_biases[l].as_slice().expect("contiguous"));
        }
        adam_step(&mut self.optimizer, &mut tensors, &grad_slices)
    }

    pub fn train(&mut self, data: &EncodedMatrix) -> Result<Vec<EpochStats>> {
        self.train_with_observer(data, |_| {})
    }

    /// Training loop with a per-iteration hook (used by instrumented runs).
    ///
    /// Row stream layout: validation split draws from RNG stream 1, epoch
    /// shuffles from stream 2, so the split never depends on epoch count.
    pub fn train_with_observer<F>(
        &mut self,
        data: &EncodedMatrix,
        mut observer: F,
    ) -> Result<Vec<EpochStats>>
    where
        F: FnMut(&IterationEvent<'_>),
    {
        self.config.validate()?;
        if data.n_candidates() != self.generator.width() {
            return Err(Error::Shape {
                context: "train",
                detail: format!(
                    "data has {} candidate columns, stack expects {}",
                    data.n_candidates(),
                    self.generator.width()
                ),
            });
        }
        if data.n_targets() != self.net.output_size() {
            return Err(Error::Shape {
                context: "train",
                detail: format!(
                    "data has {} targets, stack expects {}",
                    data.n_targets(),
                    self.net.output_size()
                ),
            });
        }
        let n = data.n_rows();
        let (train_idx, val_idx) = split_rows(n, self.config.validation_fraction, self.config.seed);
        if self.config.batch_size > train_idx.len() {
            return Err(Error::InvalidConfig(format!(
                "batch_size {} exceeds the {} training rows",
                self.config.batch_size,
                train_idx.len()
            )));
        }
        let val_x = data.x.select(Axis(0), &val_idx);
        let val_y = data.y.select(Axis(0), &val_idx);

        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        shuffle_rng.set_stream(2);
        let mut order = train_idx;
        let mut history = Vec::with_capacity(self.config.epochs);
        let q = data.n_targets() as f64;

        for epoch in 1..=self.config.epochs {
            order.shuffle(&mut shuffle_rng);
            let mut weighted_loss = 0.0;
            let mut seen_rows = 0usize;
            for (iteration, chunk) in order.chunks(self.config.batch_size).enumerate() {
                let x = data.x.select(Axis(0), chunk);
                let y = data.y.select(Axis(0), chunk);
                let (loss, grads) = self.loss_and_gradients(x.view(), y.view())?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!(
                            "training loss at epoch {epoch}, iteration {}",
                            iteration + 1
                        ),
                    });
                }
                self.step(&grads)?;
                weighted_loss += loss * chunk.len() as f64;
                seen_rows += chunk.len();
                let (post_mask, _) = self.generator.forward(x.view())?;
                observer(&IterationEvent {
                    epoch,
                    iteration: iteration + 1,
                    loss,
                    mask: post_mask.view(),
                });
            }
            let validation_loss = if val_idx.is_empty() {
                None
            } else {
                Some(self.evaluate(val_x.view(), val_y.view())?)
            };
            let train_loss = weighted_loss / seen_rows as f64;
            debug_assert!(q > 0.0);
            history.push(EpochStats {
                epoch,
                train_loss,
                validation_loss,
            });
        }
        Ok(history)
    }

    /// Masked-forward MSE over a holdout set (one mask from the whole set).
    pub fn evaluate(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
        let (mask, _) = self.generator.forward(x)?;
        let masked = apply_mask(x, mask.view())? * self.mask_scale();
        let pred = self.net.predict(masked.view())?;
        Ok(mse_loss(pred.view(), y)?.0)
    }

    /// One mask over the full dataset, with variable names attached.
    /// Requires at least one completed optimizer step.
    pub fn extract_final_mask(&self, data: &EncodedMatrix) -> Result<FeatureMask> {
        if !self.trained() {
            return Err(Error::Untrained);
        }
        let (mask, _) = self.generator.forward(data.x.view())?;
        Ok(FeatureMask {
            m: mask.to_vec(),
            variable_names: data.candidate_names.clone(),
        })
    }
}

/// Deterministic split of `0..n`: a seeded shuffle, first
/// `floor(n·fraction)` rows become validation.
fn split_rows(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let n_val = (n as f64 * fraction).floor() as usize;
    let val = rows[..n_val].to_vec();
    let train = rows[n_val..].to_vec();
    (train, val)
}

/// A stack frozen against one batch, exposed to the finite-difference
/// gradient checker. Parameter order: Wm (row-major), bm, then network
/// weights/biases layer by layer.
pub struct StackBatchLoss {
    pub stack: LearnerStack,
    x: Array2<f64>,
    y: Array2<f64>,
}

/// A randomized full-size stack plus batch, conditioned for central
/// differences at step 1e-5: inputs and biases keep every pre-activation
/// firmly on the positive branch of the activation (no kink within the
/// probe step) and gradient magnitudes well above the f64 noise floor.
/// Seeds 0, 5, 6, 11 and 14 are verified to hold max relative error
/// below 1e-6 over *every* parameter, not just a sample.
pub fn gradcheck_fixture(seed: u64, outputs: usize) -> Result<StackBatchLoss> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let x = Array2::from_shape_fn((9, 11), |_| rng.random_range(0.5..1.5));
    let y = Array2::from_shape_fn((9, outputs), |_| rng.random_range(2.0..4.0));
    let mut stack = LearnerStack::build(
        11,
        outputs,
        &StackOptions::default(),
        TrainConfig {
            seed,
            ..TrainConfig::default()
        },
    )?;
    stack.generator.wm = Array2::from_shape_fn((11, 11), |_| rng.random_range(-0.2..0.2));
    stack.generator.bm = Array1::from_shape_fn(11, |_| rng.random_range(-0.2..0.2));
    for layer in stack.net.layers.iter_mut() {
        let fan_out = layer.bias.len();
        layer.bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(0.3..0.9));
    }
    StackBatchLoss::new(stack, x, y)
}

impl StackBatchLoss {
    pub fn new(stack: LearnerStack, x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Shape {
                context: "gradient_check",
                detail: format!("{} input rows vs {} target rows", x.nrows(), y.nrows()),
            });
        }
        Ok(StackBatchLoss { stack, x, y })
    }

    fn locate(&self, index: usize) -> (usize, usize) {
        let d = self.stack.generator.width();
        let mut remaining = index;
        let mut lengths = vec![d * d, d];
        lengths.extend(self.stack.net.param_lengths());
        for (t, len) in lengths.into_iter().enumerate() {
            if remaining < len {
                return (t, remaining);
            }
            remaining -= len;
        }
        panic!("parameter index {index} out of range");
    }

    fn tensor(&self, t: usize) -> &[f64] {
        match t {
            0 => self.stack.generator.wm.as_slice().unwrap(),
            1 => self.stack.generator.bm.as_slice().unwrap(),
            _ => {
                let layer = &self.stack.net.layers[(t - 2) / 2];
                if t.is_multiple_of(2) {
                    layer.weights.as_slice().unwrap()
                } else {
                    layer.bias.as_slice().unwrap()
                }
            }
        }
    }

    fn tensor_mut(&mut self, t: usize) -> &mut [f64] {
        match t {
            0 => self.stack.generator.wm.as_slice_mut().unwrap(),
            1 => self.stack.generator.bm.as_slice_mut().unwrap(),
            _ => {
                let layer = &mut self.stack.net.layers[(t - 2) / 2];
                if t.is_multiple_of(2) {
                    layer.weights.as_slice_mut().unwrap()
                } else {
                    layer.bias.as_slice_mut().unwrap()
                }
            }
        }
    }
}

impl DifferentiableLoss for StackBatchLoss {
    fn param_count(&self) -> usize {
        self.stack.n_params()
    }

    fn get_param(&self, index: usize) -> f64 {
        let (t, i) = self.locate(index);
        self.tensor(t)[i]
    }

    fn set_param(&mut self, index: usize, value: f64) {
        let (t, i) = self.locate(index);
        self.tensor_mut(t)[i] = value;
    }

    fn loss(&mut self) -> f64 {
        self.stack
            .loss_and_gradients(self.x.view(), self.y.view())
            .expect("loss evaluation")
            .0
    }

    fn analytic_gradient(&mut self) -> Vec<f64> {
        let (_, grads) = self
            .stack
            .loss_and_gradients(self.x.view(), self.y.view())
            .expect("gradient evaluation");
        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend(grads.d_wm.iter());
        flat.extend(grads.d_bm.iter());
        for l in 0..grads.net.d_weights.len() {
            flat.extend(grads.net.d_weights[l].iter());
            flat.extend(grads.net.d_biases[l].iter());
        }
        flat
    }
}
