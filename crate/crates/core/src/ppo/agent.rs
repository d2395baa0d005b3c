//! The networks one training run owns, and how a batch of frames becomes
//! the actor, critic and estimator inputs.

use rand::Rng;

use super::config::{PpoConfig, Variant};
use crate::dim::{velocity_estimator, DimNet, LabelSpace, MoralEstimator, MORAL_IN};
use crate::env::{ObsFrame, ObsScales, EST_OBS_DIM, LATENT_DIM, N_J, OBS_DIM, X_DIM};
use crate::nn::{Checkpoint, GaussianHead, Mat, Mlp, NnError};

pub const ACTOR_OUT_GAIN: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub variant: Variant,
    pub actor: Mlp,
    pub head: GaussianHead,
    pub critic: Mlp,
    pub velocity: Mlp,
    pub dim: DimNet,
    pub moral: MoralEstimator,
}

/// Every network input for one control step, one column per env.
#[derive(Clone, Debug, PartialEq)]
pub struct StepViews {
    pub latent: Mat,
    /// `s_t^e` with the latent in its slot.
    pub est_obs: Mat,
    /// `s_t^e` without the latent (the morphology estimator input).
    pub moral_in: Mat,
    pub v_hat: Mat,
    pub actor_obs: Mat,
    pub critic_obs: Mat,
    /// First 45 entries of the actor observation: the encoder input.
    pub x: Mat,
}

fn sizes(input: usize, hidden: &[usize], out: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(out);
    s
}

fn columns(rows: usize, cols: impl ExactSizeIterator<Item = Vec<f64>>) -> Mat {
    let n = cols.len();
    let mut data = Vec::with_capacity(rows * n);
    for c in cols {
        debug_assert_eq!(c.len(), rows);
        data.extend(c);
    }
    Mat::from_vec(rows, n, data)
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(variant: Variant, cfg: &PpoConfig, rng: &mut R) -> Self {
        Self {
            variant,
            actor: Mlp::new(&sizes(OBS_DIM, &cfg.policy_hidden, N_J), ACTOR_OUT_GAIN, rng),
            head: GaussianHead::new(N_J, cfg.init_std, cfg.learn_std),
            critic: Mlp::new(&sizes(OBS_DIM, &cfg.critic_hidden, 1), 1.0, rng),
            velocity: velocity_estimator(&cfg.velocity_hidden, rng),
            dim: DimNet::new(rng),
            moral: MoralEstimator::new(cfg.moral_hidden, rng),
        }
    }

    /// Builds every view of `frames`. `hidden` is the encoder state carried
    /// into this step (ignored by the MorAL variant).
    pub fn views(&self, frames: &[ObsFrame], hidden: &Mat, sc: &ObsScales) -> Result<StepViews, NnError> {
        let n = frames.len();
        if hidden.nrows() != LATENT_DIM || hidden.ncols() != n {
            return Err(NnError::Shape(format!("hidden is {}×{}, expected {LATENT_DIM}×{n}", hidden.nrows(), hidden.ncols())));
        }
        let zero = [0.0; LATENT_DIM];
        let moral_in = columns(MORAL_IN, frames.iter().map(|f| {
            let mut v = f.estimator_obs(&zero, sc);
            v.truncate(MORAL_IN);
            v
        }));
        let latent = match self.variant {
            Variant::Pal => hidden.clone(),
            Variant::Moral => self.moral.forward(&moral_in)?.latent,
        };
        let lat = |j: usize| latent.column(j).iter().copied().collect::<Vec<f64>>();
        let est_obs = columns(EST_OBS_DIM, frames.iter().enumerate().map(|(j, f)| f.estimator_obs(&lat(j), sc)));
        let v_hat = self.velocity.predict(&est_obs)?;
        let actor_obs = columns(OBS_DIM, frames.iter().enumerate().map(|(j, f)| {
            let v = [v_hat[(0, j)], v_hat[(1, j)], v_hat[(2, j)]];
            f.policy_obs(&v, &lat(j), sc)
        }));
        let critic_obs = columns(OBS_DIM, frames.iter().enumerate().map(|(j, f)| f.policy_obs(&f.lin_vel, &lat(j), sc)));
        let x = actor_obs.rows(0, X_DIM).into_owned();
        Ok(StepViews { latent, est_obs, moral_in, v_hat, actor_obs, critic_obs, x })
    }

    /// Encoder state after this step, before any episode reset.
    pub fn next_hidden(&self, views: &StepViews, hidden: &Mat) -> Result<Mat, NnError> {
        match self.variant {
            Variant::Pal => self.dim.gru.step(&views.x, hidden),
            Variant::Moral => Ok(hidden.clone()),
        }
    }

    pub fn value(&self, critic_obs: &Mat) -> Result<Vec<f64>, NnError> {
        Ok(self.critic.predict(critic_obs)?.iter().copied().collect())
    }

    /// Deterministic action (the mean) for evaluation.
    pub fn act_mean(&self, views: &StepViews) -> Result<Mat, NnError> {
        self.actor.predict(&views.actor_obs)
    }

    pub fn put(&self, ck: &mut Checkpoint) {
        ck.put("actor", &self.actor);
        ck.put("log_std", &self.head);
        ck.put("critic", &self.critic);
        ck.put("velocity", &self.velocity);
        ck.put("dim", &self.dim);
        ck.put("moral", &self.moral);
    }

    /// Loads weights into an agent whose shapes already match the checkpoint.
    pub fn get(&mut self, ck: &Checkpoint) -> Result<(), NnError> {
        ck.get("actor", &mut self.actor)?;
        ck.get("log_std", &mut self.head)?;
        ck.get("critic", &mut self.critic)?;
        ck.get("velocity", &mut self.velocity)?;
        ck.get("dim", &mut self.dim)?;
        ck.get("moral", &mut self.moral)
    }
}

/// One labelled column per frame, for supervision targets.
pub fn velocity_targets(frames: &[ObsFrame]) -> Mat {
    columns(3, frames.iter().map(|f| f.lin_vel.to_vec()))
}

pub fn label_targets(labels: &LabelSpace, frames_params: &[&crate::morphology::MorphologyParams]) -> Mat {
    columns(crate::dim::LABEL_DIM, frames_params.iter().map(|p| labels.label(p)))
}
