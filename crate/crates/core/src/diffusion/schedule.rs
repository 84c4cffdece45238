//! Linear beta noise schedule and the closed-form forward perturbation.

use crate::error::{Error, Result};

/// Per-timestep noise levels and their cumulative products.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Cumulative signal retention: `alpha_bar[t] = prod_{i<=t} (1 - beta[i])`.
    pub alpha_bar: Vec<f64>,
    /// Cumulative noise variance: `beta_bar[t] = 1 - alpha_bar[t]`.
    pub beta_bar: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear schedule: `beta[t] = start + t * (end - start) / (T - 1)`.
    pub fn linear(timesteps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if timesteps < 2 {
            return Err(Error::config("need at least 2 timesteps"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::config(format!(
                "invalid beta bounds: start {beta_start}, end {beta_end}"
            )));
        }
        let step = (beta_end - beta_start) / (timesteps - 1) as f64;
        let beta: Vec<f64> = (0..timesteps).map(|t| beta_start + t as f64 * step).collect();
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(timesteps);
        let mut prod = 1.0;
        for &a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        let beta_bar: Vec<f64> = alpha_bar.iter().map(|a| 1.0 - a).collect();
        Ok(NoiseSchedule { beta, alpha, alpha_bar, beta_bar })
    }

    pub fn timesteps(&self) -> usize {
        self.beta.len()
    }
}

/// Closed-form forward sample `x_t = sqrt(alpha_bar[t]) * x0 +
/// sqrt(beta_bar[t]) * noise`; the noise is caller-supplied.
pub fn forward_sample(schedule: &NoiseSchedule, x0: &[f64], t: usize, noise: &[f64]) -> Result<Vec<f64>> {
    if t >= schedule.timesteps() {
        return Err(Error::config(format!("timestep {t} out of range")));
    }
    if x0.len() != noise.len() {
        return Err(Error::shape("x0 and noise lengths differ".to_string()));
    }
    let sa = schedule.alpha_bar[t].sqrt();
    let sb = schedule.beta_bar[t].sqrt();
    Ok(x0.iter().zip(noise).map(|(x, e)| sa * x + sb * e).collect())
}
