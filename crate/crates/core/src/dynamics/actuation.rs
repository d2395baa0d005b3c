//! Joint PD actuation, command latency and the torque-speed derating model
//! that replaces a learned actuator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorMode {
    IdealPd,
    Nonlinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuatorGains {
    pub kp: f64,
    pub kd: f64,
    pub tau_max: f64,
}

/// Linear torque-speed derating: full torque up to `knee_speed`, then a
/// factor falling by `slope` per knee-speed of excess, floored at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Derating {
    pub knee_speed: f64,
    pub slope: f64,
}

impl Default for Derating {
    fn default() -> Self {
        Self { knee_speed: 12.0, slope: 0.5 }
    }
}

impl Derating {
    pub fn factor(&self, qd: f64) -> f64 {
        let excess = (qd.abs() - self.knee_speed).max(0.0) / self.knee_speed;
        (1.0 - self.slope * excess).max(0.0)
    }
}

pub fn pd_torque_joint(g: &ActuatorGains, q_des: f64, q: f64, qd: f64) -> f64 {
    (g.kp * (q_des - q) - g.kd * qd).clamp(-g.tau_max, g.tau_max)
}

pub fn pd_torque(g: &ActuatorGains, q_des: &[f64], q: &[f64], qd: &[f64]) -> Vec<f64> {
    q_des
        .iter()
        .zip(q)
        .zip(qd)
        .map(|((&d, &x), &v)| pd_torque_joint(g, d, x, v))
        .collect()
}

pub fn nonlinear_torque(g: &ActuatorGains, der: &Derating, q_err: f64, qd: f64) -> f64 {
    (g.kp * q_err - g.kd * qd).clamp(-g.tau_max, g.tau_max) * der.factor(qd)
}

/// Zero-order-hold delay line for joint targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyBuffer {
    pub delay: f64,
    entries: VecDeque<(f64, Vec<f64>)>,
}

const TIME_EPS: f64 = 1e-9;

impl LatencyBuffer {
    /// The buffer starts out holding `initial` stamped at `t0`.
    pub fn new(delay: f64, initial: Vec<f64>, t0: f64) -> Self {
        let mut entries = VecDeque::new();
        entries.push_back((t0, initial));
        Self { delay: delay.max(0.0), entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, cmd: Vec<f64>, now: f64) {
        self.entries.push_back((now, cmd));
    }

    /// Newest command stamped at or before `t - delay`; the oldest entry if none is.
    pub fn query(&self, t: f64) -> &[f64] {
        let cutoff = t - self.delay + TIME_EPS;
        let mut out = &self.entries[0].1;
        for (ts, cmd) in &self.entries {
            if *ts <= cutoff {
                out = cmd;
            } else {
                break;
            }
        }
        out
    }

    /// Drops entries that can no longer be returned for any query time ≥ `t`.
    pub fn prune(&mut self, t: f64) {
        let cutoff = t - self.delay + TIME_EPS;
        while self.entries.len() > 1 && self.entries[1].0 <= cutoff {
            self.entries.pop_front();
        }
    }

    pub fn apply(&mut self, cmd: Vec<f64>, now: f64) -> Vec<f64> {
        self.push(cmd, now);
        let out = self.query(now).to_vec();
        self.prune(now);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pd_examples() {
        let g = ActuatorGains { kp: 50.0, kd: 1.0, tau_max: 100.0 };
        assert_eq!(pd_torque_joint(&g, 0.1, 0.0, 0.0), 5.0);
        assert_eq!(pd_torque_joint(&g, 0.3, 0.3, 0.0), 0.0);
        let g = ActuatorGains { kp: 120.0, kd: 1.0, tau_max: 40.0 };
        assert_eq!(pd_torque_joint(&g, 1.0, 0.0, 0.0), 40.0);
        assert_eq!(pd_torque_joint(&g, -1.0, 0.0, 0.0), -40.0);
    }

    #[test]
    fn derating_halves_at_twice_knee() {
        let g = ActuatorGains { kp: 10.0, kd: 0.0, tau_max: 100.0 };
        let d = Derating { knee_speed: 5.0, slope: 0.5 };
        assert_eq!(nonlinear_torque(&g, &d, 1.0, 10.0), 5.0);
        assert_eq!(nonlinear_torque(&g, &d, 1.0, 4.0), pd_torque_joint(&g, 1.0, 0.0, 4.0));
    }

    #[test]
    fn latency_trace() {
        let mut b = LatencyBuffer::new(0.02, vec![0.0], 0.0);
        assert_eq!(b.apply(vec![1.0], 0.0), vec![0.0]);
        assert_eq!(b.apply(vec![2.0], 0.01), vec![0.0]);
        assert_eq!(b.apply(vec![3.0], 0.02), vec![1.0]);
        assert_eq!(b.apply(vec![4.0], 0.03), vec![2.0]);
        assert!(b.len() <= 3);

        let mut z = LatencyBuffer::new(0.0, vec![0.0], 0.0);
        assert_eq!(z.apply(vec![7.0], 0.0), vec![7.0]);
    }
}
