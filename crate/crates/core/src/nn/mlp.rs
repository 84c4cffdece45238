//! Dense noise-predictor network: sinusoidal time embedding concatenated to
//! the input, a stack of equal-width hidden layers, linear output head.
//! Forward and backward passes are hand-rolled over [`ParamVector`] segments.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::param::{Layout, ParamVector};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Silu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Silu => z / (1.0 + (-z).exp()),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    pub time_embed_dim: usize,
    pub activation: Activation,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers < 1 || self.hidden_width < 1 {
            return Err(Error::config("hidden_layers and hidden_width must be >= 1"));
        }
        if self.input_dim != self.output_dim {
            return Err(Error::config(format!(
                "input_dim {} must equal output_dim {} for a noise predictor",
                self.input_dim, self.output_dim
            )));
        }
        if self.time_embed_dim % 2 != 0 {
            return Err(Error::config("time_embed_dim must be even"));
        }
        Ok(())
    }

    /// (fan_in, fan_out) of layer `l`, `l` ranging over `0..=hidden_layers`.
    fn layer_dims(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 0 { self.input_dim + self.time_embed_dim } else { self.hidden_width };
        let fan_out = if l == self.hidden_layers { self.output_dim } else { self.hidden_width };
        (fan_in, fan_out)
    }

    pub fn n_weight_layers(&self) -> usize {
        self.hidden_layers + 1
    }

    /// Adds the MLP's weight and bias segments to a layout builder.
    pub fn extend_layout(
        &self,
        mut builder: crate::nn::param::LayoutBuilder,
    ) -> crate::nn::param::LayoutBuilder {
        for l in 0..self.n_weight_layers() {
            let (fan_in, fan_out) = self.layer_dims(l);
            builder = builder
                .add(format!("layer{l}.weight"), &[fan_in, fan_out])
                .add(format!("layer{l}.bias"), &[fan_out]);
        }
        builder
    }

    pub fn layout(&self) -> Arc<Layout> {
        self.extend_layout(Layout::builder()).build()
    }

    /// Glorot-uniform init of weight segments from a seeded generator;
    /// biases stay zero.
    pub fn init_weights<R: rand::Rng>(&self, params: &mut ParamVector, rng: &mut R) -> Result<()> {
        for l in 0..self.n_weight_layers() {
            let (fan_in, fan_out) = self.layer_dims(l);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let seg = params.segment_mut(&format!("layer{l}.weight"))?;
            for w in seg.iter_mut() {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(())
    }
}

/// Sinusoidal timestep embedding: interleaved pairs
/// `(sin(t / 10000^(2k/dim)), cos(t / 10000^(2k/dim)))`.
pub fn time_embedding(t: usize, dim: usize) -> Result<Vec<f64>> {
    if dim % 2 != 0 {
        return Err(Error::config(format!("time embedding dim {dim} must be even")));
    }
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let freq = 10000f64.powf(-(2.0 * k as f64) / dim as f64);
        let angle = t as f64 * freq;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    /// Layer inputs; `activations[l]` feeds layer `l`, index 0 is `[x | temb]`.
    activations: Vec<Array2<f64>>,
    /// Pre-activation values of the hidden layers.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

fn weight_view<'a>(
    params: &'a ParamVector,
    config: &MlpConfig,
    l: usize,
) -> Result<ArrayView2<'a, f64>> {
    let (fan_in, fan_out) = config.layer_dims(l);
    let seg = params.segment(&format!("layer{l}.weight"))?;
    ArrayView2::from_shape((fan_in, fan_out), seg)
        .map_err(|e| Error::shape(format!("layer{l}.weight: {e}")))
}

/// Forward pass with cached intermediates. Pure: no state is mutated.
pub fn mlp_forward_cached(
    params: &ParamVector,
    config: &MlpConfig,
    x_batch: &Array2<f64>,
    t_batch: &[usize],
) -> Result<ForwardCache> {
    config.validate()?;
    let b = x_batch.nrows();
    if x_batch.ncols() != config.input_dim {
        return Err(Error::shape(format!(
            "input batch has {} columns, expected {}",
            x_batch.ncols(),
            config.input_dim
        )));
    }
    if t_batch.len() != b {
        return Err(Error::shape(format!(
            "timestep batch length {} does not match batch size {b}",
            t_batch.len()
        )));
    }

    let in0 = config.input_dim + config.time_embed_dim;
    let mut a0 = Array2::zeros((b, in0));
    for (r, &t) in t_batch.iter().enumerate() {
        for c in 0..config.input_dim {
            a0[[r, c]] = x_batch[[r, c]];
        }
        let emb = time_embedding(t, config.time_embed_dim)?;
        for (c, v) in emb.into_iter().enumerate() {
            a0[[r, config.input_dim + c]] = v;
        }
    }

    let mut activations = vec![a0];
    let mut pre = Vec::with_capacity(config.hidden_layers);
    for l in 0..config.n_weight_layers() {
        let w = weight_view(params, config, l)?;
        let bias = params.segment(&format!("layer{l}.bias"))?;
        let bias = Array1::from_vec(bias.to_vec());
        let mut z = activations.last().unwrap().dot(&w);
        z += &bias;
        if l < config.hidden_layers {
            let a = z.mapv(|v| config.activation.apply(v));
            pre.push(z);
            activations.push(a);
        } else {
            return Ok(ForwardCache { activations, pre, output: z });
        }
    }
    unreachable!("n_weight_layers() >= 1")
}

/// Predicted noise per row; deterministic given inputs.
pub fn mlp_forward(
    params: &ParamVector,
    config: &MlpConfig,
    x_batch: &Array2<f64>,
    t_batch: &[usize],
) -> Result<Array2<f64>> {
    Ok(mlp_forward_cached(params, config, x_batch, t_batch)?.output)
}

/// Backpropagates `grad_output` through the cached forward pass. Returns the
/// parameter gradient (same layout as `params`, non-MLP segments zero) and the
/// gradient with respect to the data part of the input.
pub fn mlp_backward(
    params: &ParamVector,
    config: &MlpConfig,
    cache: &ForwardCache,
    grad_output: &Array2<f64>,
) -> Result<(ParamVector, Array2<f64>)> {
    let b = cache.activations[0].nrows();
    if grad_output.nrows() != b || grad_output.ncols() != config.output_dim {
        return Err(Error::shape(format!(
            "grad_output shape ({}, {}) does not match output shape ({b}, {})",
            grad_output.nrows(),
            grad_output.ncols(),
            config.output_dim
        )));
    }

    let mut grads = ParamVector::zeros(params.layout().clone());
    let mut delta = grad_output.clone();
    let mut grad_input_full = None;
    for l in (0..config.n_weight_layers()).rev() {
        let a_prev = &cache.activations[l];
        let gw = a_prev.t().dot(&delta);
        let gb = delta.sum_axis(Axis(0));
        grads
            .segment_mut(&format!("layer{l}.weight"))?
            .copy_from_slice(gw.as_standard_layout().as_slice().unwrap());
        grads
            .segment_mut(&format!("layer{l}.bias"))?
            .copy_from_slice(gb.as_slice().unwrap());

        let w = weight_view(params, config, l)?;
        let upstream = delta.dot(&w.t());
        if l == 0 {
            grad_input_full = Some(upstream);
        } else {
            let z = &cache.pre[l - 1];
            delta = upstream * z.mapv(|v| config.activation.derivative(v));
        }
    }
    let full = grad_input_full.expect("loop runs at least once");
    let grad_x = full.slice(ndarray::s![.., 0..config.input_dim]).to_owned();
    Ok((grads, grad_x))
}
