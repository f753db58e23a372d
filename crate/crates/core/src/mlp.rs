//! Dense feed-forward networks built from scratch.
//!
//! An [`Mlp`] is an ordered list of dense layers, each computing
//! `y = activation(W x + b)`. Weights are stored row-major with shape
//! `(fan_out, fan_in)`. Everything is `f64`.
//!
//! Training is plain per-example gradient descent: [`backprop`] gives the exact
//! analytic gradient of a [`LossKind`] with respect to every weight and bias,
//! and [`sgd_step`] applies `θ' = θ - η g`. [`numerical_gradient`] is an
//! independent central-difference estimate used to check [`backprop`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Guard added inside the cross-entropy logarithm.
pub const LOG_EPSILON: f64 = 1e-12;

/// Default fixed pre-squash offset of the biased sigmoid.
pub const DEFAULT_BETA: f64 = 5.0;

// Largest f64 strictly below 1.0.
const SIGMOID_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Per-layer activation function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `σ(z)`.
    PlainSigmoid,
    /// `σ(z + beta)` with a fixed, non-trainable offset.
    BiasedSigmoid {
        beta: f64,
    },
    /// Only valid on the output layer.
    Softmax,
    Linear,
}

impl Activation {
    /// Pre-squash offset for the sigmoid family, zero otherwise.
    pub fn offset(&self) -> f64 {
        match *self {
            Activation::BiasedSigmoid { beta } => beta,
            _ => 0.0,
        }
    }

    pub fn is_sigmoid(&self) -> bool {
        matches!(
            self,
            Activation::PlainSigmoid | Activation::BiasedSigmoid { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        if let Activation::BiasedSigmoid { beta } = self {
            if !beta.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "biased sigmoid offset {beta} is not finite"
                )));
            }
        }
        Ok(())
    }

    /// Applies the activation in place.
    fn apply(&self, z: &mut [f64]) {
        match *self {
            Activation::PlainSigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::BiasedSigmoid { beta } => {
                z.iter_mut().for_each(|v| *v = sigmoid(*v + beta))
            }
            Activation::Softmax => softmax_in_place(z),
            Activation::Linear => {}
        }
    }
}

/// Logistic function, clamped so the result stays strictly inside (0, 1)
/// even where f64 would round to an endpoint.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    (1.0 / (1.0 + (-u).exp())).clamp(f64::MIN_POSITIVE, SIGMOID_MAX)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Applies `kind` to a vector of pre-activations.
pub fn activate(kind: Activation, pre_activations: &[f64]) -> Result<Vec<f64>> {
    kind.validate()?;
    if let Some(bad) = pre_activations.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite pre-activation {bad}"
        )));
    }
    if kind == Activation::Softmax && pre_activations.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty vector".into()));
    }
    let mut out = pre_activations.to_vec();
    kind.apply(&mut out);
    Ok(out)
}

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `Σ (out_i - target_i)²`.
    SquaredError,
    /// `-Σ target_i ln(out_i + LOG_EPSILON)`; requires a softmax output layer.
    CrossEntropy,
}

pub fn loss(kind: LossKind, output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::Shape(format!(
            "output has length {} but target has length {}",
            output.len(),
            target.len()
        )));
    }
    Ok(loss_unchecked(kind, output, target))
}

fn loss_unchecked(kind: LossKind, output: &[f64], target: &[f64]) -> f64 {
    match kind {
        LossKind::SquaredError => output
            .iter()
            .zip(target)
            .map(|(o, t)| (o - t) * (o - t))
            .sum(),
        LossKind::CrossEntropy => -output
            .iter()
            .zip(target)
            .map(|(o, t)| t * (o + LOG_EPSILON).ln())
            .sum::<f64>(),
    }
}

/// Learning rate, iteration count and seed for a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `(fan_out, fan_in)`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        fan_in: usize,
        fan_out: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::InvalidConfig(format!(
                "layer {fan_in}x{fan_out} has a zero dimension"
            )));
        }
        if weights.len() != fan_in * fan_out {
            return Err(Error::Shape(format!(
                "layer {fan_out}x{fan_in} needs {} weights, got {}",
                fan_in * fan_out,
                weights.len()
            )));
        }
        if biases.len() != fan_out {
            return Err(Error::Shape(format!(
                "layer needs {fan_out} biases, got {}",
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite layer parameter".into()));
        }
        activation.validate()?;
        Ok(Layer {
            fan_in,
            fan_out,
            weights,
            biases,
            activation,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row `o` of the weight matrix.
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.fan_in..(o + 1) * self.fan_in]
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.fan_in)
                .zip(&self.biases)
                .map(|(row, b)| dot(row, input) + b),
        );
        self.activation.apply(out);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A dense feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    layers: Vec<Layer>,
    seed: Option<u64>,
}

impl Mlp {
    /// Builds a network, checking that layer dimensions chain and that
    /// softmax appears only on the output layer.
    pub fn from_layers(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig(
                "a network needs at least one layer".into(),
            ));
        }
        let mut fan_in = input_dim;
        for (k, layer) in layers.iter().enumerate() {
            if layer.fan_in != fan_in {
                return Err(Error::Shape(format!(
                    "layer {k} expects {} inputs but receives {fan_in}",
                    layer.fan_in
                )));
            }
            if layer.activation == Activation::Softmax && k + 1 != layers.len() {
                return Err(Error::InvalidConfig(format!("softmax on hidden layer {k}")));
            }
            fan_in = layer.fan_out;
        }
        Ok(Mlp {
            input_dim,
            layers,
            seed: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// `[input_dim, fan_out_0, fan_out_1, ...]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(|l| l.fan_out))
            .collect()
    }

    /// Seed the parameters were initialized from, if known.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub(crate) fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Per-layer activations; the last entry is the network output.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layers.len());
        self.forward_acts(input, &mut acts);
        Ok(acts)
    }

    /// Network output only.
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.output_unchecked(input))
    }

    pub(crate) fn output_unchecked(&self, input: &[f64]) -> Vec<f64> {
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    fn forward_acts(&self, input: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.fan_out);
            let prev = if k == 0 { input } else { &acts[k - 1] };
            layer.forward_into(prev, &mut out);
            acts.push(out);
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim,
                input.len()
            )));
        }
        Ok(())
    }

    fn check_target(&self, target: &[f64], kind: LossKind) -> Result<()> {
        if target.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "network emits {} outputs, target has {}",
                self.output_dim(),
                target.len()
            )));
        }
        if kind == LossKind::CrossEntropy
            && self.layers.last().map(|l| l.activation) != Some(Activation::Softmax)
        {
            return Err(Error::InvalidConfig(
                "cross-entropy loss requires a softmax output layer".into(),
            ));
        }
        Ok(())
    }

    /// Error signals `∂L/∂z` for every layer, given the forward activations.
    fn deltas(&self, acts: &[Vec<f64>], target: &[f64], kind: LossKind) -> Vec<Vec<f64>> {
        let n = self.layers.len();
        let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); n];
        let out = &acts[n - 1];
        let last = &self.layers[n - 1];
        deltas[n - 1] = match (kind, last.activation) {
            // Softmax and cross-entropy together collapse to out - target.
            (LossKind::CrossEntropy, Activation::Softmax) => {
                out.iter().zip(target).map(|(o, t)| o - t).collect()
            }
            _ => {
                let dl_dy: Vec<f64> = match kind {
                    LossKind::SquaredError => {
                        out.iter().zip(target).map(|(o, t)| 2.0 * (o - t)).collect()
                    }
                    LossKind::CrossEntropy => out
                        .iter()
                        .zip(target)
                        .map(|(o, t)| -t / (o + LOG_EPSILON))
                        .collect(),
                };
                chain_activation(last.activation, out, &dl_dy)
            }
        };
        for k in (0..n - 1).rev() {
            let upper = &self.layers[k + 1];
            let mut back = vec![0.0; upper.fan_in];
            for (o, d) in deltas[k + 1].iter().enumerate() {
                for (b, w) in back.iter_mut().zip(upper.row(o)) {
                    *b += w * d;
                }
            }
            deltas[k] = chain_activation(self.layers[k].activation, &acts[k], &back);
        }
        deltas
    }

    /// Adds `scale * ∂L/∂θ` at `input` into `grads`.
    pub(crate) fn accumulate_gradient(
        &self,
        input: &[f64],
        target: &[f64],
        kind: LossKind,
        scale: f64,
        grads: &mut Gradients,
    ) {
        let mut acts = Vec::with_capacity(self.layers.len());
        self.forward_acts(input, &mut acts);
        let deltas = self.deltas(&acts, target, kind);
        for (k, (g, d)) in grads.layers.iter_mut().zip(&deltas).enumerate() {
            let prev = if k == 0 { input } else { &acts[k - 1] };
            accumulate_outer(&mut g.weights, &mut g.biases, d, prev, scale);
        }
    }

    /// Adds `(g(input) - g(anchor))` into `grads` in a single pass, where
    /// `g` is the loss gradient. Used for anchored means over replicates.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn accumulate_gradient_difference(
        &self,
        input: &[f64],
        anchor_acts: &[Vec<f64>],
        anchor_deltas: &[Vec<f64>],
        anchor_input: &[f64],
        target: &[f64],
        kind: LossKind,
        grads: &mut Gradients,
    ) {
        let mut acts = Vec::with_capacity(self.layers.len());
        self.forward_acts(input, &mut acts);
        let deltas = self.deltas(&acts, target, kind);
        for (k, g) in grads.layers.iter_mut().enumerate() {
            let (prev, anchor_prev) = if k == 0 {
                (input, anchor_input)
            } else {
                (acts[k - 1].as_slice(), anchor_acts[k - 1].as_slice())
            };
            let fan_in = prev.len();
            for (o, (d, ad)) in deltas[k].iter().zip(&anchor_deltas[k]).enumerate() {
                let row = &mut g.weights[o * fan_in..(o + 1) * fan_in];
                for ((w, x), ax) in row.iter_mut().zip(prev).zip(anchor_prev) {
                    *w += d * x - ad * ax;
                }
                g.biases[o] += d - ad;
            }
        }
    }

    pub(crate) fn forward_and_deltas(
        &self,
        input: &[f64],
        target: &[f64],
        kind: LossKind,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut acts = Vec::with_capacity(self.layers.len());
        self.forward_acts(input, &mut acts);
        let deltas = self.deltas(&acts, target, kind);
        (acts, deltas)
    }

    /// In-place `θ ← θ - η g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        grads.check_shape(self)?;
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= learning_rate * gb;
            }
        }
        Ok(())
    }

    /// Parameter `i` of layer `k`, counting weights before biases.
    fn param_mut(&mut self, k: usize, i: usize) -> &mut f64 {
        let layer = &mut self.layers[k];
        let n_weights = layer.weights.len();
        if i < n_weights {
            &mut layer.weights[i]
        } else {
            &mut layer.biases[i - n_weights]
        }
    }

    /// Visits every parameter (weights then biases, layer by layer).
    #[cfg(test)]
    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }
}

fn chain_activation(kind: Activation, y: &[f64], upstream: &[f64]) -> Vec<f64> {
    match kind {
        Activation::PlainSigmoid | Activation::BiasedSigmoid { .. } => y
            .iter()
            .zip(upstream)
            .map(|(y, g)| g * y * (1.0 - y))
            .collect(),
        Activation::Linear => upstream.to_vec(),
        Activation::Softmax => {
            let s: f64 = y.iter().zip(upstream).map(|(y, g)| y * g).sum();
            y.iter().zip(upstream).map(|(y, g)| y * (g - s)).collect()
        }
    }
}

fn accumulate_outer(
    weights: &mut [f64],
    biases: &mut [f64],
    delta: &[f64],
    prev: &[f64],
    scale: f64,
) {
    let fan_in = prev.len();
    for (o, d) in delta.iter().enumerate() {
        let sd = scale * d;
        for (w, x) in weights[o * fan_in..(o + 1) * fan_in].iter_mut().zip(prev) {
            *w += sd * x;
        }
        biases[o] += sd;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Loss gradient for every parameter, shaped like the owning [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    fn check_shape(&self, net: &Mlp) -> Result<()> {
        let ok = self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(
                "gradients do not match the network layout".into(),
            ))
        }
    }

    /// Flat view: weights then biases, layer by layer.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Exact gradient of `kind` at `(input, target)` with respect to every
/// parameter of `net`.
pub fn backprop(net: &Mlp, input: &[f64], target: &[f64], kind: LossKind) -> Result<Gradients> {
    net.check_input(input)?;
    net.check_target(target, kind)?;
    let mut grads = Gradients::zeros_like(net);
    net.accumulate_gradient(input, target, kind, 1.0, &mut grads);
    Ok(grads)
}

/// Central-difference estimate `(L(θ+h) - L(θ-h)) / 2h` for every parameter.
pub fn numerical_gradient(
    net: &Mlp,
    input: &[f64],
    target: &[f64],
    kind: LossKind,
    h: f64,
) -> Result<Gradients> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    net.check_input(input)?;
    net.check_target(target, kind)?;
    let mut probe = net.clone();
    let mut grads = Gradients::zeros_like(net);
    let eval = |n: &Mlp| loss_unchecked(kind, &n.output_unchecked(input), target);
    for k in 0..net.layers.len() {
        let n_weights = net.layers[k].weights.len();
        for i in 0..n_weights + net.layers[k].biases.len() {
            let original = *probe.param_mut(k, i);
            *probe.param_mut(k, i) = original + h;
            let plus = eval(&probe);
            *probe.param_mut(k, i) = original - h;
            let minus = eval(&probe);
            *probe.param_mut(k, i) = original;
            let g = &mut grads.layers[k];
            let estimate = (plus - minus) / (2.0 * h);
            if i < n_weights {
                g.weights[i] = estimate;
            } else {
                g.biases[i - n_weights] = estimate;
            }
        }
    }
    Ok(grads)
}

/// Returns a copy of `net` with `θ' = θ - η g` applied.
pub fn sgd_step(net: &Mlp, grads: &Gradients, learning_rate: f64) -> Result<Mlp> {
    let mut next = net.clone();
    next.apply_gradients(grads, learning_rate)?;
    Ok(next)
}

/// Builds a network with weights uniform on `[-1/√fan_in, 1/√fan_in]` and
/// zero biases, drawn from a generator seeded with `seed`.
pub fn init_network(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Mlp> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least an input and an output size, got {layer_sizes:?}"
        )));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::InvalidConfig(format!(
            "{} layer sizes need {} activations, got {}",
            layer_sizes.len(),
            layer_sizes.len() - 1,
            activations.len()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "zero-width layer in {layer_sizes:?}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let layers = layer_sizes
        .windows(2)
        .zip(activations)
        .map(|(w, &act)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            Layer::new(fan_in, fan_out, weights, vec![0.0; fan_out], act)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mlp::from_layers(layer_sizes[0], layers)?.with_seed(Some(seed)))
}

/// Relative error `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Largest [`relative_error`] over all parameters.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Outcome of [`gradient_check_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub nets: usize,
    pub max_relative_error: f64,
}

/// Finite-difference step used by the gradient check suite.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Pass threshold on the maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Compares [`backprop`] with [`numerical_gradient`] on `nets` random small
/// networks cycling through both losses and offsets 0 and 5.
pub fn gradient_check_suite(nets: usize, seed: u64) -> Result<GradCheckReport> {
    let mut worst: f64 = 0.0;
    for i in 0..nets {
        let mut rng = rng::seeded(rng::derive_seed(seed, i as u64));
        let kind = if i % 2 == 0 {
            LossKind::SquaredError
        } else {
            LossKind::CrossEntropy
        };
        let beta = if (i / 2) % 2 == 0 { 0.0 } else { DEFAULT_BETA };
        let hidden_act = if beta == 0.0 {
            Activation::PlainSigmoid
        } else {
            Activation::BiasedSigmoid { beta }
        };
        let sizes = [
            rng.gen_range(2..=8),
            rng.gen_range(2..=6),
            rng.gen_range(2..=4),
        ];
        let out_act = match kind {
            LossKind::SquaredError => hidden_act,
            LossKind::CrossEntropy => Activation::Softmax,
        };
        let mut net = init_network(&sizes, &[hidden_act, out_act], rng.gen())?;
        // Non-zero biases so every parameter is exercised.
        for b in net.layers.iter_mut().flat_map(|l| l.biases.iter_mut()) {
            *b = rng.gen_range(-0.5..0.5);
        }
        let input: Vec<f64> = (0..sizes[0])
            .map(|_| {
                let m: f64 = rng.gen_range(0.25..1.0);
                if rng.gen() {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let target: Vec<f64> = match kind {
            LossKind::SquaredError => (0..sizes[2]).map(|_| rng.gen_range(0.0..1.0)).collect(),
            LossKind::CrossEntropy => {
                let hot = rng.gen_range(0..sizes[2]);
                (0..sizes[2])
                    .map(|j| if j == hot { 1.0 } else { 0.0 })
                    .collect()
            }
        };
        let analytic = backprop(&net, &input, &target, kind)?;
        let numeric = numerical_gradient(&net, &input, &target, kind, GRADCHECK_STEP)?;
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    Ok(GradCheckReport {
        nets,
        max_relative_error: worst,
    })
}
