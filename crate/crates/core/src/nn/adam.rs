//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use super::{Mat, NnError, Params};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
}

impl Adam {
    pub fn new<P: Params>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Mat> = params.tensors().iter().map(|t| Mat::zeros(t.nrows(), t.ncols())).collect();
        Self { config, t: 0, m: zeros.clone(), v: zeros }
    }

    /// Descends along `grads` with learning rate `lr`.
    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<(), NnError> {
        let shapes = params.shapes();
        if shapes != grads.shapes() || shapes.len() != self.m.len() {
            return Err(NnError::Shape("optimizer state does not match parameters".into()));
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut self.m).zip(&mut self.v) {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                p[k] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}
