//! The recurrent dynamics inference net and the two MLP estimators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::label::LABEL_DIM;
use crate::env::{EST_OBS_DIM, LATENT_DIM, X_DIM};
use crate::nn::mlp::Linear;
use crate::nn::{Gru, Mat, Mlp, NnError, Params};

/// GRU over `x_t` whose hidden state is the latent `l_d`, plus a linear
/// readout to the dynamics label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimNet {
    pub gru: Gru,
    pub readout: Mlp,
}

impl DimNet {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self { gru: Gru::new(X_DIM, LATENT_DIM, rng), readout: Mlp::new(&[LATENT_DIM, LABEL_DIM], 1.0, rng) }
    }

    /// All-zero weights: the latent stays at zero forever.
    pub fn zeros() -> Self {
        let readout = Mlp { layers: vec![Linear { w: Mat::zeros(LABEL_DIM, LATENT_DIM), b: Mat::zeros(LABEL_DIM, 1) }] };
        Self { gru: Gru::zeros(X_DIM, LATENT_DIM), readout }
    }

    /// One step: returns `(l_d = h', label prediction)`.
    pub fn forward(&self, x: &Mat, h: &Mat) -> Result<(Mat, Mat), NnError> {
        let h1 = self.gru.step(x, h)?;
        let pred = self.readout.predict(&h1)?;
        Ok((h1, pred))
    }
}

impl Params for DimNet {
    fn tensors(&self) -> Vec<&Mat> {
        let mut t = self.gru.tensors();
        t.extend(self.readout.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut t = self.gru.tensors_mut();
        t.extend(self.readout.tensors_mut());
        t
    }
}

/// Estimator input width for the morphology estimator: `s_t^e` without `s_d`.
pub const MORAL_IN: usize = EST_OBS_DIM - LATENT_DIM;
/// Label followed by body-frame linear velocity.
pub const MORAL_OUT: usize = LABEL_DIM + 3;

/// MLP regressing the dynamics label and base velocity; its last hidden
/// layer (width 36) is the latent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoralEstimator {
    pub net: Mlp,
}

pub struct MoralOutput {
    pub latent: Mat,
    pub label: Mat,
    pub velocity: Mat,
}

impl MoralEstimator {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Self { net: Mlp::new(&[MORAL_IN, hidden, LATENT_DIM, MORAL_OUT], 1.0, rng) }
    }

    pub fn forward(&self, obs: &Mat) -> Result<MoralOutput, NnError> {
        let cache = self.net.forward(obs)?;
        let latent = cache.inputs.last().expect("three layers").clone();
        let out = &cache.output;
        Ok(MoralOutput {
            latent,
            label: out.rows(0, LABEL_DIM).into_owned(),
            velocity: out.rows(LABEL_DIM, 3).into_owned(),
        })
    }
}

impl Params for MoralEstimator {
    fn tensors(&self) -> Vec<&Mat> {
        self.net.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        self.net.tensors_mut()
    }
}

/// `s_t^e → v_B` regressor.
pub fn velocity_estimator<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Mlp {
    let mut sizes = vec![EST_OBS_DIM];
    sizes.extend_from_slice(hidden);
    sizes.push(3);
    Mlp::new(&sizes, 1.0, rng)
}

/// Mean of squared residuals over every entry, and its gradient.
pub fn mse(pred: &Mat, target: &Mat) -> (f64, Mat) {
    let n = pred.len().max(1) as f64;
    let r = pred - target;
    (r.norm_squared() / n, r * (2.0 / n))
}
