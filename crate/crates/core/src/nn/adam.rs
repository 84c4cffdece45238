//! Bias-corrected Adam with first/second-moment buffers matching the
//! parameter layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::param::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(param_len: usize, config: AdamConfig) -> Self {
        AdamState { m: vec![0.0; param_len], v: vec![0.0; param_len], step: 0, config }
    }
}

/// One Adam update in place. Errors on non-finite gradients, naming the
/// segment that holds the offending element.
pub fn adam_step(params: &mut ParamVector, grads: &ParamVector, state: &mut AdamState) -> Result<()> {
    if !params.same_layout(grads) {
        let seg = params.first_layout_divergence(grads).unwrap_or_default();
        return Err(Error::shape(format!("gradient layout mismatch at segment {seg}")));
    }
    if state.m.len() != params.len() {
        return Err(Error::shape(format!(
            "adam state length {} does not match parameter length {}",
            state.m.len(),
            params.len()
        )));
    }
    if let Some(idx) = grads.values().iter().position(|g| !g.is_finite()) {
        let seg = grads
            .layout()
            .segment_of(idx)
            .map(|s| s.name.clone())
            .unwrap_or_else(|| "<unknown>".to_string());
        return Err(Error::NonFinite(format!("gradient in segment {seg}")));
    }

    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let values = params.values_mut();
    for i in 0..values.len() {
        let g = grads.values()[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
