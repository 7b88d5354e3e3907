//! Minimal feed-forward network with ReLU hidden layers and linear
//! output, trained by shuffled mini-batch SGD. Supports three losses:
//!
//! - weighted cross-entropy over softmax outputs,
//! - the deferral surrogate over K+1 outputs,
//!   `-ln p_y - alpha * [human correct] * ln p_defer`,
//! - squared error for a single regression output.
//!
//! Everything is seeded and single-threaded; the same (seed, data,
//! config) triple reproduces parameters bit for bit. Analytic gradients
//! are checked against central finite differences in [`grad_check`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::error::{Error, Result};

/// One dense layer; `weights` is row-major `[out x in]`.
#[derive(Clone, Debug, PartialEq)]
struct Layer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(z);
        }
    }
}

/// Feed-forward parameter set. Hidden activations are ReLU; the final
/// layer is linear and its outputs are interpreted per loss (logits for
/// the classification losses, a raw value for regression).
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
}

impl Network {
    /// Seeded Glorot-uniform initialization: each layer's weights are
    /// uniform in ±sqrt(6 / (fan_in + fan_out)), biases start at zero.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.random_range(-scale..scale))
                        .collect(),
                    biases: vec![0.0; fan_out],
                    in_dim: fan_in,
                    out_dim: fan_out,
                }
            })
            .collect();
        Ok(Network {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    /// All-zero parameters (useful as a degenerate fixture).
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer {
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
                in_dim: w[0],
                out_dim: w[1],
            })
            .collect();
        Ok(Network {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    /// Builds a network from explicit row-major weight matrices and bias
    /// vectors, one per layer. Shapes are validated against `layer_dims`.
    pub fn from_parts(
        layer_dims: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let n_layers = layer_dims.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(Error::InvalidArgument(format!(
                "expected {n_layers} weight/bias blocks, got {}/{}",
                weights.len(),
                biases.len()
            )));
        }
        let layers = layer_dims
            .windows(2)
            .zip(weights.into_iter().zip(biases))
            .map(|(dims, (w, b))| {
                let (fan_in, fan_out) = (dims[0], dims[1]);
                if w.len() != fan_in * fan_out {
                    return Err(Error::DimensionMismatch {
                        expected: fan_in * fan_out,
                        actual: w.len(),
                    });
                }
                if b.len() != fan_out {
                    return Err(Error::DimensionMismatch {
                        expected: fan_out,
                        actual: b.len(),
                    });
                }
                if w.iter().chain(&b).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite parameter".into()));
                }
                Ok(Layer {
                    weights: w,
                    biases: b,
                    in_dim: fan_in,
                    out_dim: fan_out,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Network {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    fn validate_dims(layer_dims: &[usize]) -> Result<()> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "network needs at least input and output dims".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated dims")
    }

    /// Row-major weight matrices and bias vectors, one pair per layer.
    pub fn to_parts(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            self.layers.iter().map(|l| l.weights.clone()).collect(),
            self.layers.iter().map(|l| l.biases.clone()).collect(),
        )
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Flat parameter accessor (layer by layer: weights, then biases).
    fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if idx < layer.weights.len() {
                return &mut layer.weights[idx];
            }
            idx -= layer.weights.len();
            if idx < layer.biases.len() {
                return &mut layer.biases[idx];
            }
            idx -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Deterministic forward pass; returns the final-layer outputs.
    pub fn forward(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.dim(),
            });
        }
        let mut current = x.values().to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            if l != last {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }
}

/// Numerically guarded softmax: subtracts the max logit, so uniform huge
/// logits still come out as an exact uniform distribution.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// `-weight * ln probs[target]` for an already-normalized distribution.
pub fn weighted_cross_entropy(probs: &[f64], target: usize, weight: f64) -> Result<f64> {
    if target >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "target {target} out of range for {} outputs",
            probs.len()
        )));
    }
    Ok(-weight * probs[target].ln())
}

/// Deferral surrogate over K+1 logits (last output = defer):
/// `-ln p_y - alpha * [human_correct] * ln p_defer`.
///
/// When the human is wrong or `alpha` is zero this is computed as plain
/// cross-entropy on `y`, so the reduction identity holds exactly.
pub fn defer_loss(logits: &[f64], label: usize, human_correct: bool, alpha: f64) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::InvalidArgument(
            "defer loss needs at least one class output plus the defer output".into(),
        ));
    }
    let defer_idx = logits.len() - 1;
    if label >= defer_idx {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {defer_idx} classes"
        )));
    }
    let probs = softmax(logits);
    let mut loss = -probs[label].ln();
    if human_correct && alpha != 0.0 {
        loss += -alpha * probs[defer_idx].ln();
    }
    Ok(loss)
}

/// `(prediction - target)^2`.
pub fn squared_error(prediction: f64, target: f64) -> f64 {
    let d = prediction - target;
    d * d
}

/// Per-example supervision. `weight` scales the whole example loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossTarget {
    /// Weighted cross-entropy toward `label` over all outputs.
    Class { label: usize, weight: f64 },
    /// Deferral surrogate toward `label` over K+1 outputs; the deferral
    /// cost alpha comes from [`TrainConfig::deferral_cost`].
    Defer {
        label: usize,
        human_correct: bool,
        weight: f64,
    },
    /// Squared error toward `value`; requires a single output.
    Scalar { value: f64, weight: f64 },
}

#[derive(Clone, Debug)]
pub struct TrainExample {
    pub x: FeatureVector,
    pub target: LossTarget,
}

/// Training hyperparameters shared by every model in the workspace.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Base epoch count n.
    pub epochs: usize,
    /// Fine-tune phase length multiplier lambda; the fine-tune phase runs
    /// round(n * lambda) epochs.
    pub finetune_multiplier: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Deferral cost alpha in the surrogate loss.
    pub deferral_cost: f64,
    /// Self-training confidence threshold tau; 1.0 disables pseudo-labels.
    pub confidence_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            finetune_multiplier: 2.0,
            learning_rate: 0.05,
            batch_size: 32,
            deferral_cost: 1.0,
            confidence_threshold: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.finetune_multiplier.is_nan() || self.finetune_multiplier < 0.0 {
            return Err(Error::Config("finetune_multiplier must be >= 0".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.deferral_cost.is_nan() || self.deferral_cost < 0.0 {
            return Err(Error::Config("deferral_cost must be >= 0".into()));
        }
        if self.confidence_threshold.is_nan()
            || self.confidence_threshold <= 0.5
            || self.confidence_threshold > 1.0
        {
            return Err(Error::Config(
                "confidence_threshold must lie in (0.5, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Epoch count of the fine-tune phase: round(n * lambda).
    pub fn finetune_epochs(&self) -> usize {
        (self.epochs as f64 * self.finetune_multiplier).round() as usize
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Per-layer gradient accumulator shaped like the network.
struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }

    fn reset(&mut self) {
        for g in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Reused forward/backward buffers: per layer, pre-activations and
/// post-activation outputs, plus the backpropagated deltas.
struct Workspace {
    zs: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn for_net(net: &Network) -> Self {
        let widths: Vec<usize> = net.layers.iter().map(|l| l.out_dim).collect();
        Workspace {
            zs: widths.iter().map(|&w| vec![0.0; w]).collect(),
            activations: widths.iter().map(|&w| vec![0.0; w]).collect(),
            deltas: widths.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }
}

/// The loss of a single example under the current parameters.
pub fn example_loss(net: &Network, example: &TrainExample, alpha: f64) -> Result<f64> {
    let out = net.forward(&example.x)?;
    loss_of_output(&out, &example.target, alpha)
}

fn loss_of_output(out: &[f64], target: &LossTarget, alpha: f64) -> Result<f64> {
    match *target {
        LossTarget::Class { label, weight } => weighted_cross_entropy(&softmax(out), label, weight),
        LossTarget::Defer {
            label,
            human_correct,
            weight,
        } => Ok(weight * defer_loss(out, label, human_correct, alpha)?),
        LossTarget::Scalar { value, weight } => {
            if out.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    actual: out.len(),
                });
            }
            Ok(weight * squared_error(out[0], value))
        }
    }
}

/// Forward + backward for one example; accumulates parameter gradients
/// into `grads` and returns the example loss.
fn backprop_into(
    net: &Network,
    example: &TrainExample,
    alpha: f64,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> Result<f64> {
    let x = &example.x;
    if x.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: x.dim(),
        });
    }
    let last = net.layers.len() - 1;

    // Forward, caching z and activations.
    for (l, layer) in net.layers.iter().enumerate() {
        let (prev, rest) = ws.activations.split_at_mut(l);
        let input: &[f64] = if l == 0 { x.values() } else { &prev[l - 1] };
        let act = &mut rest[0];
        for (o, a) in act.iter_mut().enumerate() {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut z = layer.biases[o];
            for (w, v) in row.iter().zip(input) {
                z += w * v;
            }
            ws.zs[l][o] = z;
            *a = if l == last { z } else { z.max(0.0) };
        }
    }
    let out = &ws.activations[last];
    let loss = loss_of_output(out, &example.target, alpha)?;

    // Output-layer delta = dL/dz for each supported loss.
    match example.target {
        LossTarget::Class { label, weight } => {
            let probs = softmax(out);
            for (j, d) in ws.deltas[last].iter_mut().enumerate() {
                *d = weight * (probs[j] - f64::from(u8::from(j == label)));
            }
        }
        LossTarget::Defer {
            label,
            human_correct,
            weight,
        } => {
            let defer_idx = out.len() - 1;
            let cost = if human_correct { alpha } else { 0.0 };
            let probs = softmax(out);
            for (j, d) in ws.deltas[last].iter_mut().enumerate() {
                let mut g = (1.0 + cost) * probs[j];
                if j == label {
                    g -= 1.0;
                }
                if j == defer_idx {
                    g -= cost;
                }
                *d = weight * g;
            }
        }
        LossTarget::Scalar { value, weight } => {
            ws.deltas[last][0] = weight * 2.0 * (out[0] - value);
        }
    }

    // Backward through the hidden layers.
    for l in (0..net.layers.len()).rev() {
        if l > 0 {
            let layer = &net.layers[l];
            let (lower, upper) = ws.deltas.split_at_mut(l);
            let delta = &upper[0];
            let prev_delta = &mut lower[l - 1];
            for (i, pd) in prev_delta.iter_mut().enumerate() {
                let mut s = 0.0;
                for (o, d) in delta.iter().enumerate() {
                    s += layer.weights[o * layer.in_dim + i] * d;
                }
                // ReLU gate of the upstream hidden unit.
                *pd = if ws.zs[l - 1][i] > 0.0 { s } else { 0.0 };
            }
        }
        let layer = &net.layers[l];
        let input: &[f64] = if l == 0 {
            x.values()
        } else {
            &ws.activations[l - 1]
        };
        let gw = &mut grads.weights[l];
        let gb = &mut grads.biases[l];
        for (o, d) in ws.deltas[l].iter().enumerate() {
            gb[o] += d;
            let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (g, v) in row.iter_mut().zip(input) {
                *g += d * v;
            }
        }
    }
    Ok(loss)
}

/// Shuffled mini-batch SGD for `config.epochs` passes. Mutates `net` in
/// place and returns the mean loss per epoch in pass order. Aborts with
/// a diagnostic if any example loss goes non-finite.
pub fn train(
    net: &mut Network,
    examples: &[TrainExample],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("training examples"));
    }
    let mut ws = Workspace::for_net(net);
    let mut grads = Gradients::zeros_like(net);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            grads.reset();
            for &i in batch {
                let loss =
                    backprop_into(net, &examples[i], config.deferral_cost, &mut ws, &mut grads)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                        value: loss,
                    });
                }
                epoch_loss += loss;
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in net
                .layers
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.biases))
            {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w -= scale * g;
                }
                for (b, g) in layer.biases.iter_mut().zip(gb) {
                    *b -= scale * g;
                }
            }
        }
        trace.push(epoch_loss / examples.len() as f64);
    }
    Ok(trace)
}

/// Compares the analytic gradient of one example against central finite
/// differences over every parameter; returns the maximum relative error
/// `|g_a - g_fd| / max(1, |g_a| + |g_fd|)`.
pub fn grad_check(net: &Network, example: &TrainExample, alpha: f64, eps: f64) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {eps} outside [1e-6, 1e-3]"
        )));
    }
    let mut ws = Workspace::for_net(net);
    let mut grads = Gradients::zeros_like(net);
    backprop_into(net, example, alpha, &mut ws, &mut grads)?;
    let analytic: Vec<f64> = grads
        .weights
        .iter()
        .zip(&grads.biases)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).cloned().collect::<Vec<_>>())
        .collect();

    let mut probe = net.clone();
    let mut max_rel = 0.0f64;
    for (idx, &g_a) in analytic.iter().enumerate() {
        let original = *probe.param_mut(idx);
        *probe.param_mut(idx) = original + eps;
        let plus = example_loss(&probe, example, alpha)?;
        *probe.param_mut(idx) = original - eps;
        let minus = example_loss(&probe, example, alpha)?;
        *probe.param_mut(idx) = original;
        let g_fd = (plus - minus) / (2.0 * eps);
        let rel = (g_a - g_fd).abs() / 1.0f64.max(g_a.abs() + g_fd.abs());
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
