//! Zero-shot transfer tables: every trained policy on every unseen model,
//! with evaluation seeds shared across policies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::{estimator_rmse, success_rate, tracking_rmse, TrackingStep};
use super::rollout::{eval_env_config, run_rollouts, RolloutProtocol};
use super::EvalError;
use crate::env::{EnvConfig, TerminationCause};
use crate::morphology::{assemble_model, reference, RobotEntry, RobotSet};
use crate::ppo::{Agent, Variant};
use crate::seeding::{derive_seed, tag};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalModel {
    pub name: String,
    pub entry: RobotEntry,
}

/// Unrandomized reference defaults, named `<reference>_ref`.
pub fn reference_models(ids: &[u32]) -> Result<Vec<EvalModel>, EvalError> {
    ids.iter()
        .map(|&id| {
            let r = reference(id)?;
            let m = assemble_model(&r.defaults, &r)?;
            Ok(EvalModel { name: format!("{}_ref", r.name), entry: RobotEntry { ref_id: id, params: r.defaults.clone(), r_n: m.r_n } })
        })
        .collect()
}

pub struct PolicyUnderTest<'a> {
    pub variant: Variant,
    pub ids: Vec<u32>,
    pub agent: &'a Agent,
    pub training: &'a RobotSet,
}

impl PolicyUnderTest<'_> {
    pub fn ids_label(&self) -> String {
        self.ids.iter().map(u32::to_string).collect::<Vec<_>>().join("+")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct ZeroShotProtocol {
    pub rollouts: RolloutProtocol,
    pub seed: u64,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: String,
    pub ids: String,
    pub model: String,
    pub sr: f64,
    pub n_fail: usize,
    pub n_total: usize,
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_yaw: f64,
    pub est_rmse_x: f64,
    pub est_rmse_y: f64,
    pub est_rmse_z: f64,
    pub seed: u64,
}

/// Seeds for one model's rollouts. They depend only on the protocol seed and
/// the model name, so every policy sees the same episodes.
pub fn model_seeds(protocol: &ZeroShotProtocol, model: &str) -> (u64, Vec<u64>) {
    let base = derive_seed(protocol.seed, &[tag("zero_shot"), tag(model)]);
    (base, (0..protocol.rollouts.rollouts as u64).map(|i| derive_seed(base, &[i])).collect())
}

/// Logged rollouts of one policy on one model.
pub fn tracking_eval(
    agent: &Agent,
    robot: &RobotEntry,
    base: &EnvConfig,
    protocol: &RolloutProtocol,
    seeds: &[u64],
) -> Result<(Vec<TerminationCause>, Vec<TrackingStep>), EvalError> {
    protocol.validate()?;
    let model = Arc::new(assemble_model(&robot.params, &reference(robot.ref_id)?)?);
    let cfg = eval_env_config(base, protocol);
    let rollouts = run_rollouts(agent, &model, &cfg, seeds, true, 0)?;
    let causes = rollouts.iter().map(|r| r.cause).collect();
    Ok((causes, rollouts.into_iter().flat_map(|r| r.log).collect()))
}

pub fn zero_shot_eval(
    policies: &[PolicyUnderTest<'_>],
    models: &[EvalModel],
    protocol: &ZeroShotProtocol,
    base: &EnvConfig,
) -> Result<Vec<ReportRow>, EvalError> {
    for p in policies {
        for m in models {
            if p.training.robots.iter().any(|r| r.ref_id == m.entry.ref_id && r.params == m.entry.params) {
                return Err(EvalError::SeenModel(m.name.clone(), format!("{} {}", p.variant, p.ids_label())));
            }
        }
    }
    let mut rows = Vec::with_capacity(policies.len() * models.len());
    for p in policies {
        for m in models {
            let (seed, seeds) = model_seeds(protocol, &m.name);
            let (causes, log) = tracking_eval(p.agent, &m.entry, base, &protocol.rollouts, &seeds)?;
            let counted: Vec<_> = causes.iter().copied().filter(|&c| c != TerminationCause::SimFault).collect();
            let track = tracking_rmse(&log)?;
            let est = estimator_rmse(&log)?;
            rows.push(ReportRow {
                variant: p.variant.to_string(),
                ids: p.ids_label(),
                model: m.name.clone(),
                sr: success_rate(&counted)?,
                n_fail: counted.iter().filter(|c| c.is_failure()).count(),
                n_total: counted.len(),
                rmse_x: track[0],
                rmse_y: track[1],
                rmse_yaw: track[2],
                est_rmse_x: est[0],
                est_rmse_y: est[1],
                est_rmse_z: est[2],
                seed,
            });
        }
    }
    Ok(rows)
}
