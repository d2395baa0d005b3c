//! Reward terms of the velocity-tracking task.

use serde::{Deserialize, Serialize};

/// Everything the reward needs from one control step. Velocities are in
/// base coordinates.
#[derive(Clone, Debug)]
pub struct RewardInputs<'a> {
    pub command: [f64; 3],
    pub lin_vel: [f64; 3],
    pub ang_vel: [f64; 3],
    /// Angle between base z and world z (rad).
    pub tilt: f64,
    pub base_height: f64,
    pub r_n: f64,
    pub q: &'a [f64],
    pub q_nominal: &'a [f64],
    pub qd: &'a [f64],
    pub qdd: &'a [f64],
    pub torques: &'a [f64],
    pub q_des: &'a [f64],
    pub q_des_prev: &'a [f64],
    pub q_des_prev2: &'a [f64],
    pub contacts: &'a [bool],
    /// Tangential foot velocity (world x, y).
    pub foot_slip: &'a [[f64; 2]],
    pub t_swing: &'a [f64],
    /// Early termination by a prohibited collision this step.
    pub collided: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub lin_vel: f64,
    pub ang_vel: f64,
    pub orientation: f64,
    pub height: f64,
    pub base_motion: f64,
    pub joint_pos: f64,
    pub joint_vel: f64,
    pub joint_acc: f64,
    pub torque: f64,
    pub smooth1: f64,
    pub smooth2: f64,
    pub slip: f64,
    pub air_time: f64,
    /// −1 on collision termination.
    pub termination: f64,
    pub total: f64,
}

pub const TERM_NAMES: [&str; 14] = [
    "r_v", "r_w", "r_R", "r_h", "r_b", "r_q", "r_qd", "r_qdd", "r_tau", "r_s1", "r_s2", "r_mu", "r_air", "r_term",
];

pub const COLLISION_PENALTY: f64 = -1.0;

impl RewardBreakdown {
    pub fn terms(&self) -> [f64; 14] {
        [
            self.lin_vel,
            self.ang_vel,
            self.orientation,
            self.height,
            self.base_motion,
            self.joint_pos,
            self.joint_vel,
            self.joint_acc,
            self.torque,
            self.smooth1,
            self.smooth2,
            self.slip,
            self.air_time,
            self.termination,
        ]
    }

    pub fn sum_terms(&self) -> f64 {
        self.terms().iter().fold(0.0, |a, b| a + b)
    }
}

fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn lin_vel_reward(cmd_xy: [f64; 2], vel_xy: [f64; 2]) -> f64 {
    let e = (cmd_xy[0] - vel_xy[0]).powi(2) + (cmd_xy[1] - vel_xy[1]).powi(2);
    3.0 * (1.0 - (4.0 * e).tanh())
}

pub fn ang_vel_reward(cmd_z: f64, wz: f64) -> f64 {
    1.75 * (1.0 - (2.0 * (cmd_z - wz).powi(2)).tanh())
}

/// Per-foot air-time term; the standing branch applies when the whole command is zero.
pub fn air_time_reward(command_zero: bool, t_swing: f64) -> f64 {
    let inner = if command_zero { -t_swing } else { t_swing - 0.5 };
    -3.0 * inner
}

pub fn compute_reward(x: &RewardInputs) -> RewardBreakdown {
    let cmd_zero = x.command.iter().map(|c| c * c).sum::<f64>() == 0.0;
    let mut r = RewardBreakdown {
        lin_vel: lin_vel_reward([x.command[0], x.command[1]], [x.lin_vel[0], x.lin_vel[1]]),
        ang_vel: ang_vel_reward(x.command[2], x.ang_vel[2]),
        orientation: -5.0 * x.tilt.tanh().powi(2),
        height: -20.0 * (x.base_height - x.r_n).powi(2).tanh(),
        base_motion: -0.5 * (x.lin_vel[2].powi(2) + 0.25 * (x.ang_vel[0].abs() + x.ang_vel[1].abs())),
        joint_pos: -0.2 * sq_dist(x.q, x.q_nominal),
        joint_vel: -3e-4 * sq_norm(x.qd),
        joint_acc: -2e-7 * sq_norm(x.qdd),
        torque: -3.5e-5 * sq_norm(x.torques),
        smooth1: -0.1 * sq_dist(x.q_des, x.q_des_prev),
        smooth2: -0.05
            * x.q_des
                .iter()
                .zip(x.q_des_prev)
                .zip(x.q_des_prev2)
                .map(|((a, b), c)| (a - 2.0 * b + c).powi(2))
                .sum::<f64>(),
        slip: x
            .contacts
            .iter()
            .zip(x.foot_slip)
            .map(|(&c, v)| if c { -0.15 * (v[0] * v[0] + v[1] * v[1]).sqrt() } else { 0.0 })
            .sum(),
        air_time: x.t_swing.iter().map(|&t| air_time_reward(cmd_zero, t)).sum(),
        termination: if x.collided { COLLISION_PENALTY } else { 0.0 },
        total: 0.0,
    };
    r.total = r.sum_terms();
    r
}
