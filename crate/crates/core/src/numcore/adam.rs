use serde::{Deserialize, Serialize};

use super::{NumError, Parameters, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators mirroring a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let n = params.num_params();
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update.
    ///
    /// The effective gradient is `g + l2·θ` for decaying tensors (weights);
    /// biases see the raw gradient.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P, l2: f64) -> Result<()> {
        let g = grads.flat();
        if g.len() != self.m.len() || params.num_params() != self.m.len() {
            return Err(NumError::ShapeMismatch(format!(
                "adam state holds {} moments, params {}, grads {}",
                self.m.len(),
                params.num_params(),
                g.len()
            )));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut offset = 0;
        params.visit_mut(&mut |theta, decay| {
            for (k, w) in theta.iter_mut().enumerate() {
                let i = offset + k;
                let gi = if decay { g[i] + l2 * *w } else { g[i] };
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            offset += theta.len();
        });
        Ok(())
    }
}
