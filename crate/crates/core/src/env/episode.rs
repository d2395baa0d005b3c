//! Per-episode bookkeeping: gait timers, action and state histories, and
//! termination.

use serde::{Deserialize, Serialize};

use super::observation::N_J;
use crate::dynamics::CollisionEvents;

pub const N_FEET: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    GroundCollision,
    SelfCollision,
    Timeout,
    SimFault,
}

impl TerminationCause {
    /// Prohibited collisions; these count against the success rate.
    pub fn is_failure(self) -> bool {
        matches!(self, Self::GroundCollision | Self::SelfCollision)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GroundCollision => "ground_collision",
            Self::SelfCollision => "self_collision",
            Self::Timeout => "timeout",
            Self::SimFault => "sim_fault",
        }
    }
}

impl std::fmt::Display for TerminationCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TerminationCause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ground_collision" => Ok(Self::GroundCollision),
            "self_collision" => Ok(Self::SelfCollision),
            "timeout" => Ok(Self::Timeout),
            "sim_fault" => Ok(Self::SimFault),
            _ => Err(format!("unknown termination cause {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeState {
    /// Control steps taken so far.
    pub step: usize,
    pub t_swing: [f64; N_FEET],
    pub t_stance: [f64; N_FEET],
    pub contacts: [bool; N_FEET],
    /// Joint targets issued at t−1 and t−2.
    pub q_des_prev: [f64; N_J],
    pub q_des_prev2: [f64; N_J],
    /// Current target minus nominal.
    pub q_star: [f64; N_J],
    pub q_hist: [[f64; N_J]; 2],
    pub qd_hist: [[f64; N_J]; 2],
    pub q_star_hist: [[f64; N_J]; 2],
    pub done: Option<TerminationCause>,
}

impl EpisodeState {
    /// Fresh episode; every history slot holds the t = 0 values.
    pub fn new(q: &[f64; N_J], qd: &[f64; N_J], q_nominal: &[f64; N_J], contacts: [bool; N_FEET]) -> Self {
        Self {
            step: 0,
            t_swing: [0.0; N_FEET],
            t_stance: [0.0; N_FEET],
            contacts,
            q_des_prev: *q_nominal,
            q_des_prev2: *q_nominal,
            q_star: [0.0; N_J],
            q_hist: [*q; 2],
            qd_hist: [*qd; 2],
            q_star_hist: [[0.0; N_J]; 2],
            done: None,
        }
    }

    /// Moves the observation-time values of the step just finished into the
    /// t−1 slot.
    pub fn shift_history(&mut self, q: &[f64; N_J], qd: &[f64; N_J]) {
        self.q_hist = [*q, self.q_hist[0]];
        self.qd_hist = [*qd, self.qd_hist[0]];
        self.q_star_hist = [self.q_star, self.q_star_hist[0]];
    }

    /// Records a newly issued target.
    pub fn push_target(&mut self, q_des: &[f64; N_J], q_nominal: &[f64; N_J]) {
        self.q_des_prev2 = self.q_des_prev;
        self.q_des_prev = *q_des;
        for j in 0..N_J {
            self.q_star[j] = q_des[j] - q_nominal[j];
        }
    }
}

/// Advances swing and stance timers by `dt`. A foot's swing timer is zeroed
/// on touchdown and its stance timer on takeoff.
pub fn update_timers(
    t_swing: &mut [f64; N_FEET],
    t_stance: &mut [f64; N_FEET],
    prev: &[bool; N_FEET],
    now: &[bool; N_FEET],
    dt: f64,
) {
    for i in 0..N_FEET {
        match (prev[i], now[i]) {
            (false, true) => {
                t_swing[i] = 0.0;
                t_stance[i] = 0.0;
            }
            (true, false) => {
                t_stance[i] = 0.0;
                t_swing[i] = 0.0;
            }
            (true, true) => t_stance[i] += dt,
            (false, false) => t_swing[i] += dt,
        }
    }
}

/// Collision terminations take precedence over the time limit.
pub fn check_termination(collisions: &CollisionEvents, step: usize, max_steps: usize) -> (bool, Option<TerminationCause>, f64) {
    if collisions.ground {
        (true, Some(TerminationCause::GroundCollision), super::reward::COLLISION_PENALTY)
    } else if collisions.self_collision {
        (true, Some(TerminationCause::SelfCollision), super::reward::COLLISION_PENALTY)
    } else if step >= max_steps {
        (true, Some(TerminationCause::Timeout), 0.0)
    } else {
        (false, None, 0.0)
    }
}
