//! A small multilayer perceptron with exact reverse-mode gradients.
//!
//! Layer `ℓ` computes `g_ℓ = φ(W_ℓ g_{ℓ−1} + b_ℓ)`. Parameters of all layers
//! live in one flat buffer: for each layer, the weight matrix (row-major,
//! `outputs × inputs`) followed by the bias. [`ParamGrads`] and the Adam
//! moment buffers use the same layout.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::sample::SampleSet;

/// RNG stream used for parameter initialization.
const INIT_STREAM: u64 = 1;

/// Points per gradient-accumulation chunk. Fixed so the summation tree does
/// not depend on thread count.
const GRAD_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerShape {
    fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }

    fn param_len(&self) -> usize {
        self.weight_len() + self.outputs
    }
}

/// Network parameters θ = (W_ℓ, b_ℓ) together with their layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<LayerShape>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Gradient with respect to every entry of an [`MlpParams`], same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    values: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        ParamGrads {
            values: vec![0.0; params.values.len()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn weight<'a>(&'a self, params: &MlpParams, layer: usize) -> &'a [f64] {
        let (w, _) = params.layer_ranges(layer);
        &self.values[w]
    }

    pub fn bias<'a>(&'a self, params: &MlpParams, layer: usize) -> &'a [f64] {
        let (_, b) = params.layer_ranges(layer);
        &self.values[b]
    }

    fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

impl MlpParams {
    /// Builds parameters from explicit layer shapes and a flat value buffer.
    pub fn from_parts(layers: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::input("network needs at least one layer"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::input(format!(
                    "layer {l} outputs {} values but layer {} expects {}",
                    pair[0].outputs,
                    l + 1,
                    pair[1].inputs
                )));
            }
        }
        if layers.iter().any(|s| s.inputs == 0 || s.outputs == 0) {
            return Err(Error::input("layer widths must be at least 1"));
        }
        let first = layers[0].inputs;
        let last = layers[layers.len() - 1].outputs;
        if first != last {
            return Err(Error::input(format!(
                "transport map must be R^d -> R^d, got {first} -> {last}"
            )));
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for s in &layers {
            offsets.push(total);
            total += s.param_len();
        }
        if values.len() != total {
            return Err(Error::input(format!(
                "expected {total} parameter values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite parameter value"));
        }
        Ok(MlpParams {
            layers,
            offsets,
            values,
        })
    }

    /// Random initialization: weights uniform in `±1/√fan_in`, biases zero.
    ///
    /// `widths` lists every layer width from input to output, so
    /// `[2, 64, 2]` is one hidden layer of 64 units. `activations` has one
    /// entry per weight layer.
    pub fn init(widths: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::input("shape needs at least input and output widths"));
        }
        if widths.contains(&0) {
            return Err(Error::input("layer widths must be at least 1"));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::input(format!(
                "{} layers need {} activations, got {}",
                widths.len() - 1,
                widths.len() - 1,
                activations.len()
            )));
        }
        let layers: Vec<LayerShape> = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| LayerShape {
                inputs: w[0],
                outputs: w[1],
                activation,
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut values = Vec::new();
        for s in &layers {
            let bound = 1.0 / (s.inputs as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound)
                .map_err(|e| Error::input(format!("initializer: {e}")))?;
            values.extend((0..s.weight_len()).map(|_| dist.sample(&mut rng)));
            values.extend(std::iter::repeat_n(0.0, s.outputs));
        }
        Self::from_parts(layers, values)
    }

    /// A single linear layer `x ↦ Wx + b` with identity activation.
    pub fn affine(weight: &[f64], bias: &[f64]) -> Result<Self> {
        let d = bias.len();
        if weight.len() != d * d {
            return Err(Error::input("affine map needs a d x d weight"));
        }
        let mut values = weight.to_vec();
        values.extend_from_slice(bias);
        Self::from_parts(
            vec![LayerShape {
                inputs: d,
                outputs: d,
                activation: Activation::Identity,
            }],
            values,
        )
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::translation(&vec![0.0; dim])
    }

    /// The map `x ↦ x + shift`.
    pub fn translation(shift: &[f64]) -> Result<Self> {
        let d = shift.len();
        let mut w = vec![0.0; d * d];
        for i in 0..d {
            w[i * d + i] = 1.0;
        }
        Self::affine(&w, shift)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let s = &self.layers[l];
        let o = self.offsets[l];
        (o..o + s.weight_len(), o + s.weight_len()..o + s.param_len())
    }

    pub fn weight(&self, l: usize) -> &[f64] {
        &self.values[self.layer_ranges(l).0]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.values[self.layer_ranges(l).1]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.layer_ranges(l).0;
        &mut self.values[r]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.layer_ranges(l).1;
        &mut self.values[r]
    }

    /// Forward pass keeping every layer's pre- and post-activation.
    fn forward_trace(&self, x: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut trace: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        for (l, s) in self.layers.iter().enumerate() {
            let input: &[f64] = match trace.last() {
                Some((_, a)) => a,
                None => x,
            };
            let w = self.weight(l);
            let b = self.bias(l);
            let z: Vec<f64> = (0..s.outputs)
                .map(|r| {
                    let row = &w[r * s.inputs..(r + 1) * s.inputs];
                    row.iter().zip(input).fold(b[r], |acc, (wi, xi)| acc + wi * xi)
                })
                .collect();
            let a = z.iter().map(|&v| s.activation.apply(v)).collect();
            trace.push((z, a));
        }
        trace
    }

    fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).pop().map(|(_, a)| a).unwrap_or_default()
    }

    /// `T_θ(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::input(format!(
                "input has dimension {}, network expects {}",
                x.len(),
                self.dim()
            )));
        }
        let y = self.forward_unchecked(x);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("network produced a non-finite output"));
        }
        Ok(y)
    }

    /// Applies [`MlpParams::forward`] to every point.
    pub fn forward_batch(&self, xs: &SampleSet) -> Result<SampleSet> {
        if xs.is_empty() {
            return Err(Error::input("cannot push forward an empty sample set"));
        }
        if xs.dim() != self.dim() {
            return Err(Error::input(format!(
                "samples have dimension {}, network expects {}",
                xs.dim(),
                self.dim()
            )));
        }
        let d = self.dim();
        let mut out = vec![0.0; xs.len() * d];
        par::for_each_chunk_mut(&mut out, d, |i, dst| {
            dst.copy_from_slice(&self.forward_unchecked(xs.point(i)));
        });
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("network produced a non-finite output"));
        }
        SampleSet::from_flat(d, out)
    }

    /// Accumulates one point's parameter gradient into `grads`.
    fn backward_point(&self, x: &[f64], upstream: &[f64], grads: &mut [f64]) {
        let trace = self.forward_trace(x);
        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let s = self.layers[l];
            let (z, a) = &trace[l];
            for ((dv, &zv), &av) in delta.iter_mut().zip(z).zip(a) {
                *dv *= s.activation.derivative(zv, av);
            }
            let input: &[f64] = if l == 0 { x } else { &trace[l - 1].1 };
            let (wr, br) = self.layer_ranges(l);
            let gw = &mut grads[wr.clone()];
            for (r, &dv) in delta.iter().enumerate() {
                if dv == 0.0 {
                    continue;
                }
                for (g, &xi) in gw[r * s.inputs..(r + 1) * s.inputs].iter_mut().zip(input) {
                    *g += dv * xi;
                }
            }
            for (g, &dv) in grads[br].iter_mut().zip(&delta) {
                *g += dv;
            }
            if l > 0 {
                let w = &self.values[wr];
                let mut next = vec![0.0; s.inputs];
                for (r, &dv) in delta.iter().enumerate() {
                    for (n, &wv) in next.iter_mut().zip(&w[r * s.inputs..(r + 1) * s.inputs]) {
                        *n += dv * wv;
                    }
                }
                delta = next;
            }
        }
    }

    /// Reverse-mode gradient of `Σ_i ⟨upstream_i, T_θ(x_i)⟩` with respect to θ.
    ///
    /// `upstream` is flat, one `d`-vector per point of `xs`.
    pub fn backward(&self, xs: &SampleSet, upstream: &[f64]) -> Result<ParamGrads> {
        let d = self.dim();
        if xs.dim() != d {
            return Err(Error::input(format!(
                "samples have dimension {}, network expects {d}",
                xs.dim()
            )));
        }
        if upstream.len() != xs.len() * d {
            return Err(Error::input(format!(
                "expected {} upstream values for {} points, got {}",
                xs.len() * d,
                xs.len(),
                upstream.len()
            )));
        }
        let n_chunks = xs.len().div_ceil(GRAD_CHUNK);
        let partials = par::map_indexed(n_chunks, |c| {
            let mut g = ParamGrads::zeros_like(self);
            let end = ((c + 1) * GRAD_CHUNK).min(xs.len());
            for i in c * GRAD_CHUNK..end {
                self.backward_point(xs.point(i), &upstream[i * d..(i + 1) * d], &mut g.values);
            }
            g
        });
        let mut total = ParamGrads::zeros_like(self);
        for p in &partials {
            total.add_assign(p);
        }
        if total.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite parameter gradient"));
        }
        Ok(total)
    }
}
