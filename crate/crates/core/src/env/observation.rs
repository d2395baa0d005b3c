//! Observation assembly.
//!
//! Index layout of the 168-dim policy/critic observation `s_t`:
//!
//! | term      | range     | content                                   |
//! |-----------|-----------|-------------------------------------------|
//! | s_R       | 0..3      | world z axis in base coordinates          |
//! | s_v       | 3..9      | base linear then angular velocity (body)  |
//! | s_j       | 9..33     | joint positions then joint velocities     |
//! | s_*       | 33..45    | current target minus nominal              |
//! | s_n       | 45..57    | nominal joint angles                      |
//! | s_c       | 57..60    | command (vx, vy, wz)                      |
//! | s_h,q     | 60..84    | joint positions at t−1, t−2               |
//! | s_h,q̇     | 84..108   | joint velocities at t−1, t−2              |
//! | s_h,q*    | 108..132  | target errors at t−1, t−2                 |
//! | s_d       | 132..168  | latent dynamics                           |
//!
//! The 165-dim estimator view drops the linear velocity (so every later
//! term moves down by 3) and `x_t` is the first 45 entries of `s_t`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::EnvError;

pub const N_J: usize = 12;
pub const LATENT_DIM: usize = 36;
pub const OBS_DIM: usize = 168;
pub const EST_OBS_DIM: usize = 165;
pub const X_DIM: usize = 45;

pub mod layout {
    use std::ops::Range;

    pub const S_R: Range<usize> = 0..3;
    pub const S_V: Range<usize> = 3..9;
    pub const S_J: Range<usize> = 9..33;
    pub const S_STAR: Range<usize> = 33..45;
    pub const S_N: Range<usize> = 45..57;
    pub const S_C: Range<usize> = 57..60;
    pub const S_HQ: Range<usize> = 60..84;
    pub const S_HQD: Range<usize> = 84..108;
    pub const S_HQSTAR: Range<usize> = 108..132;
    pub const S_D: Range<usize> = 132..168;

    /// Term ranges of `s_t` in packing order.
    pub const TERMS: [(&str, Range<usize>); 10] = [
        ("s_R", S_R),
        ("s_v", S_V),
        ("s_j", S_J),
        ("s_star", S_STAR),
        ("s_n", S_N),
        ("s_c", S_C),
        ("s_hq", S_HQ),
        ("s_hqd", S_HQD),
        ("s_hqstar", S_HQSTAR),
        ("s_d", S_D),
    ];
}

/// Per-term multipliers applied while packing. Fixed constants, so the
/// same physical state always maps to the same input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObsScales {
    pub lin_vel: f64,
    pub ang_vel: f64,
    pub joint_vel: f64,
    pub command: f64,
}

impl Default for ObsScales {
    fn default() -> Self {
        Self { lin_vel: 1.0, ang_vel: 0.25, joint_vel: 0.05, command: 1.0 }
    }
}

/// Unscaled state terms at one control step, before any network runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsFrame {
    pub gravity_axis: [f64; 3],
    /// True body-frame base linear velocity.
    pub lin_vel: [f64; 3],
    pub ang_vel: [f64; 3],
    pub q: [f64; N_J],
    pub qd: [f64; N_J],
    pub q_star: [f64; N_J],
    pub q_nominal: [f64; N_J],
    pub command: [f64; 3],
    /// `[t−1, t−2]`.
    pub q_hist: [[f64; N_J]; 2],
    pub qd_hist: [[f64; N_J]; 2],
    pub q_star_hist: [[f64; N_J]; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationBundle {
    pub s_t: Vec<f64>,
    pub s_e: Vec<f64>,
    pub x_t: Vec<f64>,
    pub s_d: Vec<f64>,
}

impl ObsFrame {
    fn push_head(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.gravity_axis);
    }

    fn push_joints(&self, out: &mut Vec<f64>, sc: &ObsScales) {
        out.extend_from_slice(&self.q);
        out.extend(self.qd.iter().map(|v| v * sc.joint_vel));
        out.extend_from_slice(&self.q_star);
    }

    fn push_tail(&self, out: &mut Vec<f64>, sc: &ObsScales, latent: &[f64]) {
        out.extend_from_slice(&self.q_nominal);
        out.extend(self.command.iter().map(|v| v * sc.command));
        for h in &self.q_hist {
            out.extend_from_slice(h);
        }
        for h in &self.qd_hist {
            out.extend(h.iter().map(|v| v * sc.joint_vel));
        }
        for h in &self.q_star_hist {
            out.extend_from_slice(h);
        }
        out.extend_from_slice(latent);
    }

    fn push_ang(&self, out: &mut Vec<f64>, sc: &ObsScales) {
        out.extend(self.ang_vel.iter().map(|v| v * sc.ang_vel));
    }

    /// `x_t` with the given linear velocity in the twist slot.
    pub fn x_t(&self, lin_vel: &[f64; 3], sc: &ObsScales) -> Vec<f64> {
        let mut out = Vec::with_capacity(X_DIM);
        self.push_head(&mut out);
        out.extend(lin_vel.iter().map(|v| v * sc.lin_vel));
        self.push_ang(&mut out, sc);
        self.push_joints(&mut out, sc);
        out
    }

    /// `s_t` with the given linear velocity (estimate for the actor, truth for the critic).
    pub fn policy_obs(&self, lin_vel: &[f64; 3], latent: &[f64], sc: &ObsScales) -> Vec<f64> {
        let mut out = self.x_t(lin_vel, sc);
        out.reserve(OBS_DIM - X_DIM);
        self.push_tail(&mut out, sc, latent);
        out
    }

    /// `s_t^e`: angular velocity only in the twist slot.
    pub fn estimator_obs(&self, latent: &[f64], sc: &ObsScales) -> Vec<f64> {
        let mut out = Vec::with_capacity(EST_OBS_DIM);
        self.push_head(&mut out);
        self.push_ang(&mut out, sc);
        self.push_joints(&mut out, sc);
        self.push_tail(&mut out, sc, latent);
        out
    }
}

/// Packs all views. `lin_vel` fills the actor's velocity slot; `None` uses
/// the true velocity.
pub fn assemble_observation(
    frame: &ObsFrame,
    latent: &[f64],
    lin_vel: Option<[f64; 3]>,
    scales: &ObsScales,
) -> Result<ObservationBundle, EnvError> {
    if latent.len() != LATENT_DIM {
        return Err(EnvError::Observation(format!("latent has {} entries, expected {LATENT_DIM}", latent.len())));
    }
    let v = lin_vel.unwrap_or(frame.lin_vel);
    let s_t = frame.policy_obs(&v, latent, scales);
    let s_e = frame.estimator_obs(latent, scales);
    let x_t = s_t[..X_DIM].to_vec();
    debug_assert_eq!(s_t.len(), OBS_DIM);
    debug_assert_eq!(s_e.len(), EST_OBS_DIM);
    Ok(ObservationBundle { s_t, s_e, x_t, s_d: latent.to_vec() })
}

/// Range of a `s_t` term inside `s_t^e`.
pub fn estimator_range(term: Range<usize>) -> Range<usize> {
    if term.start < layout::S_V.end {
        if term == layout::S_V {
            3..6
        } else {
            term
        }
    } else {
        term.start - 3..term.end - 3
    }
}
