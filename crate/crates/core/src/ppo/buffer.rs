//! Rollout collection into time-major storage: column `t · n_env + e` holds
//! env `e` at step `t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::agent::{velocity_targets, Agent};
use super::PpoError;
use crate::dim::{LabelSpace, SequenceRecorder, LABEL_DIM};
use crate::env::{ObsScales, TerminationCause, VecEnv, LATENT_DIM};
use crate::nn::Mat;

/// Per-env bookkeeping that outlives a single rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutState {
    /// Encoder state carried into the next step.
    pub hidden: Mat,
    pub episode_len: Vec<usize>,
    pub episode_return: Vec<f64>,
    /// Control steps taken by each env since training began.
    pub env_steps: u64,
}

impl RolloutState {
    pub fn new(n_env: usize) -> Self {
        Self { hidden: Mat::zeros(LATENT_DIM, n_env), episode_len: vec![0; n_env], episode_return: vec![0.0; n_env], env_steps: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub env: usize,
    pub length: usize,
    pub total_reward: f64,
    pub cause: TerminationCause,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBatch {
    pub n_env: usize,
    pub steps: usize,
    pub actor_obs: Mat,
    pub critic_obs: Mat,
    pub est_obs: Mat,
    pub moral_in: Mat,
    pub x: Mat,
    /// Encoder state each step started from.
    pub hidden: Mat,
    pub actions: Mat,
    pub means: Mat,
    pub logp: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub causes: Vec<Option<TerminationCause>>,
    /// Bootstrap value of each step: `V(s_{t+1})` inside an episode,
    /// `V(s_T)` after a time-limit truncation, 0 after any other ending.
    pub next_values: Vec<f64>,
    pub v_true: Mat,
    pub labels: Mat,
    pub episodes: Vec<EpisodeEnd>,
    /// Sum over the batch of each reward term, in `TERM_NAMES` order.
    pub term_sums: [f64; 14],
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.n_env * self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn col(&self, t: usize, e: usize) -> usize {
        t * self.n_env + e
    }

    /// Column indices of whole env streams, time-major within the selection.
    pub fn stream_columns(&self, envs: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(envs.len() * self.steps);
        for t in 0..self.steps {
            out.extend(envs.iter().map(|&e| self.col(t, e)));
        }
        out
    }

    /// Per-env series `(rewards, values, dones, next_values)` in time order.
    pub fn stream(&self, e: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>, Vec<f64>) {
        let idx: Vec<usize> = (0..self.steps).map(|t| self.col(t, e)).collect();
        (
            idx.iter().map(|&i| self.rewards[i]).collect(),
            idx.iter().map(|&i| self.values[i]).collect(),
            idx.iter().map(|&i| self.dones[i]).collect(),
            idx.iter().map(|&i| self.next_values[i]).collect(),
        )
    }
}

fn hstack(parts: &[Mat]) -> Mat {
    let rows = parts.first().map_or(0, |m| m.nrows());
    let cols: usize = parts.iter().map(|m| m.ncols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for p in parts {
        data.extend_from_slice(p.as_slice());
    }
    Mat::from_vec(rows, cols, data)
}

/// Runs `steps` control steps on every env under a fixed agent. After each
/// step `after_step(venv, env_steps)` may swap the robot pool.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts<R: Rng + ?Sized>(
    agent: &Agent,
    venv: &mut VecEnv,
    state: &mut RolloutState,
    steps: usize,
    labels: &LabelSpace,
    sc: &ObsScales,
    rng: &mut R,
    mut recorder: Option<&mut SequenceRecorder>,
    after_step: &mut dyn FnMut(&mut VecEnv, u64) -> Result<(), PpoError>,
) -> Result<TrajectoryBatch, PpoError> {
    let n = venv.len();
    let mut parts: [Vec<Mat>; 10] = Default::default();
    let (mut logp, mut values, mut rewards, mut dones, mut causes) = (vec![], vec![], vec![], vec![], vec![]);
    let mut boot: Vec<Option<f64>> = Vec::with_capacity(n * steps);
    let mut episodes = Vec::new();
    let mut term_sums = [0.0; 14];
    let mut frames = venv.frames();
    for _ in 0..steps {
        let views = agent.views(&frames, &state.hidden, sc)?;
        let mean = agent.actor.predict(&views.actor_obs)?;
        let action = agent.head.sample(&mean, rng);
        logp.extend(agent.head.log_prob(&mean, &action));
        values.extend(agent.value(&views.critic_obs)?);
        let mut next_h = agent.next_hidden(&views, &state.hidden)?;
        let label_cols: Vec<Vec<f64>> = venv.envs().iter().map(|e| labels.label(&e.robot().params)).collect();
        let mut lab = Mat::zeros(LABEL_DIM, n);
        for (j, l) in label_cols.iter().enumerate() {
            lab.column_mut(j).copy_from_slice(l);
        }

        let actions: Vec<Vec<f64>> = action.column_iter().map(|c| c.iter().copied().collect()).collect();
        let out = venv.step_all(&actions)?;

        // Truncated episodes bootstrap from their last frame with the
        // encoder state that frame would have been seen with.
        let trunc: Vec<usize> = (0..n).filter(|&e| out[e].cause == Some(TerminationCause::Timeout)).collect();
        let mut trunc_values = vec![None; n];
        if !trunc.is_empty() {
            let tf: Vec<_> = trunc.iter().map(|&e| out[e].terminal_frame.clone().expect("reset after done")).collect();
            let h = Mat::from_fn(LATENT_DIM, trunc.len(), |i, k| next_h[(i, trunc[k])]);
            let v = agent.value(&agent.views(&tf, &h, sc)?.critic_obs)?;
            for (k, &e) in trunc.iter().enumerate() {
                trunc_values[e] = Some(v[k]);
            }
        }
        for (e, r) in out.iter().enumerate() {
            let rew = r.reward.total;
            for (acc, v) in term_sums.iter_mut().zip(r.reward.terms()) {
                *acc += v;
            }
            rewards.push(rew);
            dones.push(r.done);
            causes.push(r.cause);
            state.episode_len[e] += 1;
            state.episode_return[e] += rew;
            if let Some(rec) = recorder.as_deref_mut() {
                let x: Vec<f64> = views.x.column(e).iter().copied().collect();
                rec.record(e, &x, &label_cols[e], r.done);
            }
            boot.push(if r.done { Some(trunc_values[e].unwrap_or(0.0)) } else { None });
            if r.done {
                episodes.push(EpisodeEnd {
                    env: e,
                    length: state.episode_len[e],
                    total_reward: state.episode_return[e],
                    cause: r.cause.unwrap_or(TerminationCause::SimFault),
                });
                state.episode_len[e] = 0;
                state.episode_return[e] = 0.0;
                next_h.column_mut(e).fill(0.0);
            }
        }
        let v_true = velocity_targets(&frames);
        for (slot, m) in parts.iter_mut().zip([
            views.actor_obs,
            views.critic_obs,
            views.est_obs,
            views.moral_in,
            views.x,
            std::mem::replace(&mut state.hidden, next_h),
            action,
            mean,
            v_true,
            lab,
        ]) {
            slot.push(m);
        }
        frames = out.into_iter().map(|r| r.frame).collect();
        state.env_steps += 1;
        after_step(venv, state.env_steps)?;
    }
    let last = agent.value(&agent.views(&frames, &state.hidden, sc)?.critic_obs)?;
    let total = n * steps;
    let next_values = (0..total)
        .map(|i| match boot[i] {
            Some(v) => v,
            None if i + n < total => values[i + n],
            None => last[i % n],
        })
        .collect();
    let [actor_obs, critic_obs, est_obs, moral_in, x, hidden, actions, means, v_true, labels] = parts.map(|p| hstack(&p));
    Ok(TrajectoryBatch {
        n_env: n,
        steps,
        actor_obs,
        critic_obs,
        est_obs,
        moral_in,
        x,
        hidden,
        actions,
        means,
        logp,
        values,
        rewards,
        dones,
        causes,
        next_values,
        v_true,
        labels,
        episodes,
        term_sums,
    })
}
