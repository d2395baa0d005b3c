//! Standing test that gates generated robots.

use serde::{Deserialize, Serialize};

use super::tree::RobotModel;
use crate::dynamics::{SimConfig, Simulator};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViabilityOptions {
    pub duration: f64,
    pub control_dt: f64,
    /// Initial base clearance above `r_n` (m).
    pub drop_height: f64,
    pub max_tilt_deg: f64,
    /// Minimum base height as a fraction of `r_n`.
    pub min_height_fraction: f64,
}

impl Default for ViabilityOptions {
    fn default() -> Self {
        Self { duration: 2.0, control_dt: 0.01, drop_height: 0.02, max_tilt_deg: 60.0, min_height_fraction: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViabilityOutcome {
    Viable,
    GroundCollision,
    SelfCollision,
    Fall,
    Diverged,
}

impl ViabilityOutcome {
    pub fn is_viable(self) -> bool {
        self == ViabilityOutcome::Viable
    }
}

/// Tilt of the base z-axis from world z (rad).
pub fn tilt_angle(rot: &nalgebra::Matrix3<f64>) -> f64 {
    rot[(2, 2)].clamp(-1.0, 1.0).acos()
}

/// Drops the robot at `q^n` with PD holding `q^n` and watches it for `duration`.
pub fn viability_check(model: &RobotModel, sim_config: &SimConfig, opts: &ViabilityOptions) -> ViabilityOutcome {
    let state = model.standing_state(opts.drop_height, model.nominal.clone());
    let mut sim = Simulator::new(model.multibody.clone(), *sim_config, Some(model.actuation(0.0)), state);
    let steps = (opts.duration / opts.control_dt).round() as usize;
    let max_tilt = opts.max_tilt_deg.to_radians();
    let min_height = opts.min_height_fraction * model.r_n;
    let classify = |ev: &crate::dynamics::CollisionEvents| {
        if ev.self_collision {
            Some(ViabilityOutcome::SelfCollision)
        } else if ev.ground {
            Some(ViabilityOutcome::GroundCollision)
        } else {
            None
        }
    };
    if let Some(o) = classify(&sim.collisions()) {
        return o;
    }
    for _ in 0..steps {
        match sim.step(&model.nominal, opts.control_dt) {
            Ok(out) => {
                if let Some(o) = classify(&out.collisions) {
                    return o;
                }
            }
            Err(e) => {
                log::debug!("viability rollout diverged: {e}");
                return ViabilityOutcome::Diverged;
            }
        }
        let s = sim.state();
        if tilt_angle(&s.rotation()) >= max_tilt || s.base_pos.z <= min_height {
            return ViabilityOutcome::Fall;
        }
    }
    ViabilityOutcome::Viable
}
