//! Batched deterministic rollouts of a trained agent.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::TrackingStep;
use super::EvalError;
use crate::env::{Env, EnvConfig, TerminationCause, LATENT_DIM};
use crate::morphology::{Bounds, RobotModel};
use crate::nn::Mat;
use crate::ppo::Agent;

/// Shared evaluation protocol knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutProtocol {
    /// Rollouts per evaluated condition (N_T).
    pub rollouts: usize,
    /// Episode horizon (s). Reaching it is a success.
    pub duration: f64,
    pub command_scale: f64,
    /// Seconds between command resamples.
    pub command_hold: f64,
}

impl Default for RolloutProtocol {
    fn default() -> Self {
        Self { rollouts: 100, duration: 8.0, command_scale: 0.75, command_hold: 4.0 }
    }
}

impl RolloutProtocol {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.rollouts == 0 {
            return Err(EvalError::Config("rollouts must be at least 1".into()));
        }
        if !(self.duration > 0.0 && self.command_hold > 0.0 && self.command_scale >= 0.0) {
            return Err(EvalError::Config("duration and command_hold must be positive, command_scale non-negative".into()));
        }
        Ok(())
    }
}

/// The training env config with evaluation commands and horizon.
pub fn eval_env_config(base: &EnvConfig, p: &RolloutProtocol) -> EnvConfig {
    let mut cfg = base.clone();
    cfg.commands.scale = p.command_scale;
    cfg.commands.duration = Bounds::new(p.command_hold, p.command_hold);
    cfg.commands.zero_probability = 0.0;
    cfg.max_steps = (p.duration / cfg.control_dt).round().max(1.0) as usize;
    cfg.push = None;
    cfg
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub seed: u64,
    pub cause: TerminationCause,
    pub steps: usize,
    pub log: Vec<TrackingStep>,
}

/// Runs one episode per seed on `robot` with the mean action. Every env sits
/// in the batch until all are done, so a rollout's result depends only on its
/// seed. `rollout_base` offsets the rollout index in the logs.
pub fn run_rollouts(
    agent: &Agent,
    robot: &Arc<RobotModel>,
    cfg: &EnvConfig,
    seeds: &[u64],
    record: bool,
    rollout_base: usize,
) -> Result<Vec<Rollout>, EvalError> {
    let n = seeds.len();
    let mut envs: Vec<Env> = seeds.par_iter().map(|&s| Env::new(0, robot.clone(), cfg.clone(), s)).collect();
    let mut hidden = Mat::zeros(LATENT_DIM, n);
    let mut out: Vec<Rollout> =
        seeds.iter().map(|&seed| Rollout { seed, cause: TerminationCause::Timeout, steps: 0, log: Vec::new() }).collect();
    let mut active = vec![true; n];
    while active.iter().any(|&a| a) {
        let frames: Vec<_> = envs.iter().map(Env::frame).collect();
        let views = agent.views(&frames, &hidden, &cfg.scales)?;
        let mean = agent.act_mean(&views)?;
        hidden = agent.next_hidden(&views, &hidden)?;
        let results: Vec<_> = envs
            .par_iter_mut()
            .enumerate()
            .filter(|(j, _)| active[*j])
            .map(|(j, env)| {
                let a: Vec<f64> = mean.column(j).iter().copied().collect();
                env.step(&a).map(|r| (j, r))
            })
            .collect::<Result<_, _>>()?;
        for (j, r) in results {
            let o = &mut out[j];
            if record {
                let f = &frames[j];
                o.log.push(TrackingStep {
                    rollout: rollout_base + j,
                    step: o.steps,
                    t: o.steps as f64 * cfg.control_dt,
                    cmd_vx: r.command[0],
                    cmd_vy: r.command[1],
                    cmd_wz: r.command[2],
                    vx: r.frame.lin_vel[0],
                    vy: r.frame.lin_vel[1],
                    wz: r.frame.ang_vel[2],
                    est_vx: views.v_hat[(0, j)],
                    est_vy: views.v_hat[(1, j)],
                    est_vz: views.v_hat[(2, j)],
                    true_vx: f.lin_vel[0],
                    true_vy: f.lin_vel[1],
                    true_vz: f.lin_vel[2],
                });
            }
            o.steps += 1;
            if let Some(c) = r.cause {
                o.cause = c;
                active[j] = false;
            }
        }
    }
    Ok(out)
}
