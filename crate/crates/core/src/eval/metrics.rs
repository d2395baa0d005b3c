//! Pure metric functions over termination outcomes and per-step logs.

use serde::{Deserialize, Serialize};

use crate::env::TerminationCause;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no samples")]
    Empty,
    #[error("simulator faults must be removed before computing the success rate")]
    SimFault,
}

/// `SR = 1 − N_e/N_T`, with `N_e` the prohibited-collision terminations.
pub fn success_rate(outcomes: &[TerminationCause]) -> Result<f64, MetricError> {
    if outcomes.is_empty() {
        return Err(MetricError::Empty);
    }
    if outcomes.contains(&TerminationCause::SimFault) {
        return Err(MetricError::SimFault);
    }
    let n_e = outcomes.iter().filter(|c| c.is_failure()).count();
    Ok(1.0 - n_e as f64 / outcomes.len() as f64)
}

/// One control step of an evaluation rollout. `t = step · 10 ms`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingStep {
    pub rollout: usize,
    pub step: usize,
    pub t: f64,
    pub cmd_vx: f64,
    pub cmd_vy: f64,
    pub cmd_wz: f64,
    /// Body-frame twist after the step.
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
    /// Estimated and true body-frame linear velocity at the observation.
    pub est_vx: f64,
    pub est_vy: f64,
    pub est_vz: f64,
    pub true_vx: f64,
    pub true_vy: f64,
    pub true_vz: f64,
}

/// The estimator columns of a [`TrackingStep`], written to `estimator.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub rollout: usize,
    pub step: usize,
    pub t: f64,
    pub est_vx: f64,
    pub est_vy: f64,
    pub est_vz: f64,
    pub true_vx: f64,
    pub true_vy: f64,
    pub true_vz: f64,
}

impl From<&TrackingStep> for EstimatorRow {
    fn from(s: &TrackingStep) -> Self {
        Self {
            rollout: s.rollout,
            step: s.step,
            t: s.t,
            est_vx: s.est_vx,
            est_vy: s.est_vy,
            est_vz: s.est_vz,
            true_vx: s.true_vx,
            true_vy: s.true_vy,
            true_vz: s.true_vz,
        }
    }
}

fn rms3<I: Iterator<Item = [f64; 3]>>(residuals: I) -> Result<[f64; 3], MetricError> {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for r in residuals {
        for k in 0..3 {
            acc[k] += r[k] * r[k];
        }
        n += 1;
    }
    if n == 0 {
        return Err(MetricError::Empty);
    }
    Ok(acc.map(|s| (s / n as f64).sqrt()))
}

/// Component RMSE of command − measured: (x, y, yaw rate).
pub fn tracking_rmse(log: &[TrackingStep]) -> Result<[f64; 3], MetricError> {
    rms3(log.iter().map(|s| [s.cmd_vx - s.vx, s.cmd_vy - s.vy, s.cmd_wz - s.wz]))
}

/// Component RMSE of v̂_B − v_B: (x, y, z).
pub fn estimator_rmse(log: &[TrackingStep]) -> Result<[f64; 3], MetricError> {
    rms3(log.iter().map(|s| [s.est_vx - s.true_vx, s.est_vy - s.true_vy, s.est_vz - s.true_vz]))
}
