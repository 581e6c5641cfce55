//! Decision functions `g(x; θ)`: linear models and multilayer perceptrons
//! with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector. Layers are stored in order; within a
//! layer the weight matrix comes first (row-major, `fan_out × fan_in`),
//! followed by the `fan_out` biases.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PuError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softsign,
    Identity,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Relu => a.max(0.0),
            Activation::Softsign => a / (1.0 + a.abs()),
            Activation::Identity => a,
        }
    }

    fn derivative(self, a: f64) -> f64 {
        match self {
            // subgradient 0 at the kink
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softsign => {
                let d = 1.0 + a.abs();
                1.0 / (d * d)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softsign => "softsign",
            Activation::Identity => "identity",
        }
    }
}

impl FromStr for Activation {
    type Err = PuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "softsign" => Ok(Activation::Softsign),
            "identity" => Ok(Activation::Identity),
            other => Err(PuError::Architecture(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
}

impl Layer {
    fn param_count(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

/// Layer list ending in a single identity output unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layers: Vec<Layer>,
}

impl Architecture {
    /// Hidden layers share `activation`; the output layer is always a
    /// single identity unit.
    pub fn mlp(input_dim: usize, hidden: &[usize], activation: Activation) -> Result<Self> {
        if input_dim == 0 {
            return Err(PuError::Architecture("input dimension must be positive".into()));
        }
        if hidden.contains(&0) {
            return Err(PuError::Architecture("hidden widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        for &width in hidden {
            layers.push(Layer {
                fan_in,
                fan_out: width,
                activation,
            });
            fan_in = width;
        }
        layers.push(Layer {
            fan_in,
            fan_out: 1,
            activation: Activation::Identity,
        });
        Ok(Self { layers })
    }

    pub fn linear(input_dim: usize) -> Result<Self> {
        Self::mlp(input_dim, &[], Activation::Identity)
    }

    /// Builds from explicit layers; the last layer must have width 1.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(PuError::Architecture("empty layer list".into()));
        };
        if last.fan_out != 1 {
            return Err(PuError::Architecture(format!(
                "output width must be 1, got {}",
                last.fan_out
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(PuError::Architecture(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].fan_out, pair[1].fan_in
                )));
            }
        }
        if layers.iter().any(|l| l.fan_in == 0 || l.fan_out == 0) {
            return Err(PuError::Architecture("zero-width layer".into()));
        }
        Ok(Self { layers })
    }

    /// Parses `"d-300-300-1:relu"`. The leading `d` may be a number or the
    /// literal `d`, which is replaced by `input_dim`.
    pub fn parse(spec: &str, input_dim: usize) -> Result<Self> {
        let (widths, activation) = match spec.split_once(':') {
            Some((w, a)) => (w, a.trim().parse()?),
            None => (spec, Activation::Identity),
        };
        let mut dims = Vec::new();
        for (i, tok) in widths.split('-').enumerate() {
            let tok = tok.trim();
            let dim = if i == 0 && tok == "d" {
                input_dim
            } else {
                tok.parse::<usize>()
                    .map_err(|_| PuError::Architecture(format!("bad width `{tok}` in `{spec}`")))?
            };
            dims.push(dim);
        }
        if dims.len() < 2 {
            return Err(PuError::Architecture(format!("`{spec}` needs input and output widths")));
        }
        if dims[0] != input_dim {
            return Err(PuError::Architecture(format!(
                "`{spec}` expects input dimension {}, data has {input_dim}",
                dims[0]
            )));
        }
        if *dims.last().unwrap() != 1 {
            return Err(PuError::Architecture(format!("`{spec}` must end in width 1")));
        }
        Self::mlp(dims[0], &dims[1..dims.len() - 1], activation)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn is_linear(&self) -> bool {
        self.layers.len() == 1
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Offsets of each layer's weight block.
    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for l in &self.layers {
            out.push(at);
            at += l.param_count();
        }
        out
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input_dim())?;
        for l in &self.layers {
            write!(f, "-{}", l.fan_out)?;
        }
        let hidden_act = if self.layers.len() > 1 {
            self.layers[0].activation
        } else {
            Activation::Identity
        };
        write!(f, ":{}", hidden_act.name())
    }
}

/// Gradient with the same layout as [`Model::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub values: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, scale: f64, other: &GradientBuffer) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> GradientBuffer {
        GradientBuffer {
            values: self.values.iter().map(|v| scale * v).collect(),
        }
    }
}

/// Cached activations of one forward pass, consumed by [`Model::backward_from`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
    param_count: usize,
}

impl ForwardPass {
    pub fn scores(&self) -> &[f64] {
        self.pre.last().expect("non-empty pass").as_slice()
    }

    pub fn rows(&self) -> usize {
        self.inputs[0].rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    architecture: Architecture,
    pub parameters: Vec<f64>,
    pub l2_coefficient: f64,
}

/// ChaCha stream reserved for weight initialization.
const INIT_STREAM: u64 = 0x1d17;

pub const DEFAULT_L2: f64 = 5e-3;

impl Model {
    pub fn new(architecture: Architecture, parameters: Vec<f64>, l2_coefficient: f64) -> Result<Self> {
        if parameters.len() != architecture.param_count() {
            return Err(PuError::Shape(format!(
                "{} parameters for an architecture needing {}",
                parameters.len(),
                architecture.param_count()
            )));
        }
        if l2_coefficient.is_nan() || l2_coefficient < 0.0 {
            return Err(PuError::Config(format!("l2 coefficient {l2_coefficient} must be >= 0")));
        }
        Ok(Self {
            architecture,
            parameters,
            l2_coefficient,
        })
    }

    /// `g(x) = w·x + b`.
    pub fn linear(weights: &[f64], bias: f64) -> Result<Self> {
        let arch = Architecture::linear(weights.len())?;
        let mut params = weights.to_vec();
        params.push(bias);
        Self::new(arch, params, 0.0)
    }

    /// Glorot-uniform weights, zero biases; deterministic in `seed`.
    ///
    /// Draws from a dedicated ChaCha stream so that a dataset sampled with
    /// the same integer seed is not correlated with the weights.
    pub fn init(architecture: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut parameters = Vec::with_capacity(architecture.param_count());
        for l in architecture.layers() {
            let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            for _ in 0..l.fan_in * l.fan_out {
                parameters.push(rng.random_range(-limit..=limit));
            }
            parameters.extend(std::iter::repeat_n(0.0, l.fan_out));
        }
        Self {
            architecture,
            parameters,
            l2_coefficient: 0.0,
        }
    }

    pub fn with_l2(mut self, l2: f64) -> Self {
        self.l2_coefficient = l2;
        self
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    /// `(weights, bias)` of a linear model.
    pub fn linear_parts(&self) -> Option<(&[f64], f64)> {
        if !self.architecture.is_linear() {
            return None;
        }
        let d = self.input_dim();
        Some((&self.parameters[..d], self.parameters[d]))
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(PuError::Shape(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Scores `g(x_i; θ)` for each row of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        if let Some((w, b)) = self.linear_parts() {
            return Ok(batch
                .iter_rows()
                .map(|x| x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b)
                .collect());
        }
        let mut current = batch.clone();
        let offsets = self.architecture.offsets();
        for (layer, &off) in self.architecture.layers().iter().zip(&offsets) {
            let mut pre = self.affine(layer, off, &current);
            apply_in_place(&mut pre, layer.activation);
            current = pre;
        }
        Ok(current.as_slice().to_vec())
    }

    /// Forward pass that keeps what [`Model::backward_from`] needs.
    pub fn forward_pass(&self, batch: &Matrix) -> Result<ForwardPass> {
        self.check_batch(batch)?;
        let layers = self.architecture.layers();
        let offsets = self.architecture.offsets();
        let mut inputs = Vec::with_capacity(layers.len());
        let mut pre = Vec::with_capacity(layers.len());
        inputs.push(batch.clone());
        for (i, (layer, &off)) in layers.iter().zip(&offsets).enumerate() {
            let a = self.affine(layer, off, &inputs[i]);
            if i + 1 < layers.len() {
                let mut h = a.clone();
                apply_in_place(&mut h, layer.activation);
                inputs.push(h);
            }
            pre.push(a);
        }
        // the output unit is identity, so its pre-activation is the score
        debug_assert_eq!(layers.last().unwrap().activation, Activation::Identity);
        Ok(ForwardPass {
            inputs,
            pre,
            param_count: self.parameters.len(),
        })
    }

    fn affine(&self, layer: &Layer, offset: usize, input: &Matrix) -> Matrix {
        let w = &self.parameters[offset..offset + layer.fan_in * layer.fan_out];
        let b = &self.parameters[offset + layer.fan_in * layer.fan_out..offset + layer.param_count()];
        let mut out = Matrix::zeros(input.rows(), layer.fan_out);
        for (i, x) in input.iter_rows().enumerate() {
            let row = out.row_mut(i);
            for (o, slot) in row.iter_mut().enumerate() {
                let wo = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                *slot = x.iter().zip(wo).map(|(a, c)| a * c).sum::<f64>() + b[o];
            }
        }
        out
    }

    /// `∇_θ Σ_i upstream_i · g(x_i; θ)` plus the weight-decay term.
    pub fn backward(&self, batch: &Matrix, upstream: &[f64]) -> Result<GradientBuffer> {
        let pass = self.forward_pass(batch)?;
        self.backward_from(&pass, upstream)
    }

    /// Like [`Model::backward`] but reusing a cached forward pass.
    pub fn backward_from(&self, pass: &ForwardPass, upstream: &[f64]) -> Result<GradientBuffer> {
        let mut grad = self.backward_unregularized(pass, upstream)?;
        self.add_weight_decay(&mut grad);
        Ok(grad)
    }

    /// Chain rule only, without weight decay.
    pub fn backward_unregularized(&self, pass: &ForwardPass, upstream: &[f64]) -> Result<GradientBuffer> {
        let layers = self.architecture.layers();
        if pass.param_count != self.parameters.len() || pass.pre.len() != layers.len() {
            return Err(PuError::MissingForwardContext(
                "forward pass was produced by a different architecture".into(),
            ));
        }
        if upstream.len() != pass.rows() {
            return Err(PuError::Shape(format!(
                "upstream has {} entries for a batch of {}",
                upstream.len(),
                pass.rows()
            )));
        }
        let offsets = self.architecture.offsets();
        let mut grad = GradientBuffer::zeros(self.parameters.len());
        let n = pass.rows();
        // delta holds ∂/∂(pre-activation) of the current layer, n × fan_out
        let mut delta = Matrix::column(upstream.to_vec());
        for li in (0..layers.len()).rev() {
            let layer = &layers[li];
            let off = offsets[li];
            let input = &pass.inputs[li];
            let (gw, gb) = grad.values[off..off + layer.param_count()].split_at_mut(layer.fan_in * layer.fan_out);
            for i in 0..n {
                let x = input.row(i);
                for (o, &d) in delta.row(i).iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let go = &mut gw[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (g, &xv) in go.iter_mut().zip(x) {
                        *g += d * xv;
                    }
                }
            }
            if li == 0 {
                break;
            }
            let below = &layers[li - 1];
            let w = &self.parameters[off..off + layer.fan_in * layer.fan_out];
            let pre_below = &pass.pre[li - 1];
            let mut next = Matrix::zeros(n, layer.fan_in);
            for i in 0..n {
                let out = next.row_mut(i);
                for (o, &d) in delta.row(i).iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (acc, &wv) in out.iter_mut().zip(&w[o * layer.fan_in..(o + 1) * layer.fan_in]) {
                        *acc += d * wv;
                    }
                }
                for (acc, &a) in out.iter_mut().zip(pre_below.row(i)) {
                    *acc *= below.activation.derivative(a);
                }
            }
            delta = next;
        }
        Ok(grad)
    }

    /// Adds `l2 · w` for every weight (biases excluded).
    pub fn add_weight_decay(&self, grad: &mut GradientBuffer) {
        if self.l2_coefficient == 0.0 {
            return;
        }
        for (layer, off) in self.architecture.layers().iter().zip(self.architecture.offsets()) {
            let nw = layer.fan_in * layer.fan_out;
            for (g, w) in grad.values[off..off + nw]
                .iter_mut()
                .zip(&self.parameters[off..off + nw])
            {
                *g += self.l2_coefficient * w;
            }
        }
    }

    /// `(l2 / 2) · ‖w‖²`, the penalty whose gradient [`Model::add_weight_decay`] adds.
    pub fn weight_penalty(&self) -> f64 {
        if self.l2_coefficient == 0.0 {
            return 0.0;
        }
        let mut sq = 0.0;
        for (layer, off) in self.architecture.layers().iter().zip(self.architecture.offsets()) {
            let nw = layer.fan_in * layer.fan_out;
            sq += self.parameters[off..off + nw].iter().map(|w| w * w).sum::<f64>();
        }
        0.5 * self.l2_coefficient * sq
    }

    /// Pre-activations of every hidden unit, used by gradient checks to
    /// stay away from relu kinks.
    pub fn hidden_preactivations(&self, batch: &Matrix) -> Result<Vec<f64>> {
        let pass = self.forward_pass(batch)?;
        let hidden = pass.pre.len() - 1;
        Ok(pass.pre[..hidden]
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect())
    }
}

fn apply_in_place(m: &mut Matrix, act: Activation) {
    if act == Activation::Identity {
        return;
    }
    for i in 0..m.rows() {
        for v in m.row_mut(i) {
            *v = act.apply(*v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn linear_forward() {
        let zero = Model::linear(&[0.0, 0.0], 0.0).unwrap();
        assert_eq!(zero.forward(&batch(&[&[3.0, -1.0]])).unwrap(), vec![0.0]);
        let m = Model::linear(&[2.0], 1.0).unwrap();
        assert_eq!(m.forward(&batch(&[&[3.0]])).unwrap(), vec![7.0]);
    }

    #[test]
    fn relu_mlp_hand_trace() {
        let arch = Architecture::mlp(1, &[2], Activation::Relu).unwrap();
        // w1 = (1, 1), b1 = (0, 0), w2 = (1, 1), b2 = 0
        let m = Model::new(arch, vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(m.forward(&batch(&[&[-1.0]])).unwrap(), vec![0.0]);
        assert_eq!(m.forward(&batch(&[&[2.0]])).unwrap(), vec![4.0]);
    }

    #[test]
    fn shape_errors() {
        let m = Model::linear(&[1.0, 2.0], 0.0).unwrap();
        assert!(matches!(m.forward(&batch(&[&[1.0]])), Err(PuError::Shape(_))));
        let x = batch(&[&[1.0, 2.0]]);
        assert!(matches!(m.backward(&x, &[1.0, 2.0]), Err(PuError::Shape(_))));
    }

    #[test]
    fn mismatched_forward_pass_rejected() {
        let a = Model::init(Architecture::mlp(2, &[3], Activation::Relu).unwrap(), 1);
        let b = Model::init(Architecture::linear(2).unwrap(), 1);
        let x = batch(&[&[1.0, 2.0]]);
        let pass = a.forward_pass(&x).unwrap();
        assert!(matches!(
            b.backward_from(&pass, &[1.0]),
            Err(PuError::MissingForwardContext(_))
        ));
    }

    #[test]
    fn linear_backward_by_hand() {
        let m = Model::linear(&[0.0], 0.0).unwrap();
        let g = m.backward(&batch(&[&[3.0]]), &[1.0]).unwrap();
        assert_eq!(g.values, vec![3.0, 1.0]);
        let zero = m.backward(&batch(&[&[3.0], &[4.0]]), &[0.0, 0.0]).unwrap();
        assert_eq!(zero.values, vec![0.0, 0.0]);
    }

    #[test]
    fn weight_decay_skips_biases() {
        let m = Model::linear(&[2.0], 5.0).unwrap().with_l2(0.5);
        let g = m.backward(&batch(&[&[1.0]]), &[0.0]).unwrap();
        assert_eq!(g.values, vec![1.0, 0.0]);
        assert_eq!(m.weight_penalty(), 0.5 * 0.5 * 4.0);
    }

    #[test]
    fn parameter_count() {
        let arch = Architecture::mlp(784, &[300, 300, 300, 300], Activation::Relu).unwrap();
        assert_eq!(arch.param_count(), 785 * 300 + 3 * 301 * 300 + 301);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let arch = Architecture::mlp(784, &[300], Activation::Relu).unwrap();
        let a = Model::init(arch.clone(), 7);
        let b = Model::init(arch.clone(), 7);
        let c = Model::init(arch, 8);
        assert_eq!(a.parameters, b.parameters);
        assert_ne!(a.parameters, c.parameters);
        let limit = (6.0f64 / 1084.0).sqrt();
        assert!(a.parameters[..784 * 300].iter().all(|w| w.abs() <= limit));
        assert!(a.parameters[784 * 300..785 * 300].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn architecture_strings() {
        let a = Architecture::parse("d-300-300-1:relu", 5).unwrap();
        assert_eq!(a.layers().len(), 3);
        assert_eq!(a.to_string(), "5-300-300-1:relu");
        let s = Architecture::parse("2-10-1:softsign", 2).unwrap();
        assert_eq!(s.layers()[0].activation, Activation::Softsign);
        assert!(Architecture::parse("3-1", 3).unwrap().is_linear());
        assert!(Architecture::parse("3-10-2:relu", 3).is_err());
        assert!(Architecture::parse("4-10-1:relu", 3).is_err());
        assert!(Architecture::parse("d-x-1:relu", 3).is_err());
        assert!(Architecture::parse("d-10-1:tanh", 3).is_err());
        assert!(Architecture::from_layers(vec![]).is_err());
    }
}
