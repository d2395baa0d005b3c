//! One robot in one simulator, stepped at the control rate.

use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng as _;

use super::command::{sample_command, Command};
use super::episode::{check_termination, update_timers, EpisodeState, TerminationCause, N_FEET};
use super::observation::{ObsFrame, N_J};
use super::reward::{compute_reward, RewardBreakdown, RewardInputs};
use super::{EnvConfig, EnvError};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Push, SimSnapshot, SimState, Simulator};
use crate::morphology::{assemble_model, reference, MorphologyError, RobotEntry, RobotModel};
use crate::seeding::{rng_for, tag, Rng};

fn arr<const N: usize>(v: &[f64]) -> [f64; N] {
    let mut out = [0.0; N];
    out.copy_from_slice(&v[..N]);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    /// Observation frame the next action should be computed from. After a
    /// termination this is the first frame of the new episode.
    pub frame: ObsFrame,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub cause: Option<TerminationCause>,
    /// Last frame of the finished episode, for bootstrapping truncations.
    pub terminal_frame: Option<ObsFrame>,
    /// Command in force during the step.
    pub command: [f64; 3],
    pub contacts: [bool; N_FEET],
}

/// Serializable env state for exact resumption.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub id: usize,
    pub robot: RobotEntry,
    pub sim: SimSnapshot,
    pub rng: Rng,
    pub episode: EpisodeState,
    pub command: Command,
    /// `None` when pushes are disabled.
    pub next_push: Option<f64>,
    pub episodes_started: u64,
}

pub struct Env {
    pub id: usize,
    pub config: EnvConfig,
    robot: Arc<RobotModel>,
    sim: Simulator,
    rng: Rng,
    episode: EpisodeState,
    command: Command,
    next_push: f64,
    episodes_started: u64,
    nominal: [f64; N_J],
}

impl Env {
    /// Creates the env and resets it. `seed` and `id` fix its random stream.
    pub fn new(id: usize, robot: Arc<RobotModel>, config: EnvConfig, seed: u64) -> Self {
        let rng = rng_for(seed, &[tag("env"), id as u64]);
        let nominal = arr(&robot.nominal);
        let sim = Simulator::new(
            robot.multibody.clone(),
            config.sim,
            Some(robot.actuation(0.0)),
            robot.standing_state(config.init_clearance, robot.nominal.clone()),
        );
        let episode = EpisodeState::new(&nominal, &[0.0; N_J], &nominal, [false; N_FEET]);
        let mut env = Self {
            id,
            config,
            robot,
            sim,
            rng,
            episode,
            command: Command::default(),
            next_push: 0.0,
            episodes_started: 0,
            nominal,
        };
        env.reset(None);
        env
    }

    pub fn robot(&self) -> &Arc<RobotModel> {
        &self.robot
    }

    pub fn sim_state(&self) -> &SimState {
        self.sim.state()
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn episode(&self) -> &EpisodeState {
        &self.episode
    }

    pub fn command(&self) -> Command {
        self.command
    }

    /// Overrides the active command until its `remaining` time runs out.
    pub fn set_command(&mut self, cmd: Command) {
        self.command = cmd;
    }

    /// Number of resets so far, including the one in `new`.
    pub fn episodes_started(&self) -> u64 {
        self.episodes_started
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            id: self.id,
            robot: RobotEntry { ref_id: self.robot.ref_id, params: self.robot.params.clone(), r_n: self.robot.r_n },
            sim: self.sim.snapshot(),
            rng: self.rng.clone(),
            episode: self.episode.clone(),
            command: self.command,
            next_push: self.next_push.is_finite().then_some(self.next_push),
            episodes_started: self.episodes_started,
        }
    }

    /// Rebuilds an env from a snapshot; the robot model is reassembled from
    /// its stored parameters.
    pub fn restore(snap: EnvSnapshot, config: EnvConfig) -> Result<Self, MorphologyError> {
        let robot = Arc::new(assemble_model(&snap.robot.params, &reference(snap.robot.ref_id)?)?);
        let mut sim = Simulator::new(robot.multibody.clone(), config.sim, None, snap.sim.state.clone());
        sim.restore(snap.sim);
        Ok(Self {
            id: snap.id,
            nominal: arr(&robot.nominal),
            config,
            robot,
            sim,
            rng: snap.rng,
            episode: snap.episode,
            command: snap.command,
            next_push: snap.next_push.unwrap_or(f64::INFINITY),
            episodes_started: snap.episodes_started,
        })
    }

    /// Starts a new episode, optionally on a different robot.
    pub fn reset(&mut self, robot: Option<Arc<RobotModel>>) -> ObsFrame {
        if let Some(r) = robot {
            self.nominal = arr(&r.nominal);
            self.robot = r;
        }
        let noise = self.config.init_joint_noise;
        let q0: Vec<f64> = self
            .nominal
            .iter()
            .map(|&q| if noise > 0.0 { q + self.rng.random_range(-noise..=noise) } else { q })
            .collect();
        let state = self.robot.standing_state(self.config.init_clearance, q0);
        self.sim = Simulator::new(self.robot.multibody.clone(), self.config.sim, Some(self.robot.actuation(0.0)), state);
        self.command = sample_command(&mut self.rng, &self.config.commands);
        let s = self.sim.state();
        let contacts = self.contact_flags();
        self.episode = EpisodeState::new(&arr(&s.q), &arr(&s.qd), &self.nominal, contacts);
        self.next_push = self.config.push.map_or(f64::INFINITY, |p| p.period);
        self.episodes_started += 1;
        self.frame()
    }

    fn contact_flags(&self) -> [bool; N_FEET] {
        let mut c = [false; N_FEET];
        for (slot, f) in c.iter_mut().zip(&self.sim.last().contacts.feet) {
            *slot = f.in_contact;
        }
        c
    }

    /// World z in base coordinates plus body-frame twist.
    fn body_terms(s: &SimState) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let rt = s.rotation().transpose();
        let g = rt * Vector3::z();
        let v = rt * s.base_lin_vel;
        let w = rt * s.base_ang_vel;
        ([g.x, g.y, g.z], [v.x, v.y, v.z], [w.x, w.y, w.z])
    }

    pub fn frame(&self) -> ObsFrame {
        let s = self.sim.state();
        let (gravity_axis, lin_vel, ang_vel) = Self::body_terms(s);
        let e = &self.episode;
        ObsFrame {
            gravity_axis,
            lin_vel,
            ang_vel,
            q: arr(&s.q),
            qd: arr(&s.qd),
            q_star: e.q_star,
            q_nominal: self.nominal,
            command: self.command.as_array(),
            q_hist: e.q_hist,
            qd_hist: e.qd_hist,
            q_star_hist: e.q_star_hist,
        }
    }

    fn schedule_pushes(&mut self) {
        let Some(p) = self.config.push else { return };
        let t = self.sim.state().t;
        while self.next_push <= t + self.config.control_dt - 1e-9 {
            let angle = self.rng.random_range(0.0..std::f64::consts::TAU);
            let start = self.next_push;
            self.sim.schedule_push(Push {
                start,
                end: start + p.duration,
                force: [p.force * angle.cos(), p.force * angle.sin(), 0.0],
            });
            self.next_push += p.period;
        }
    }

    /// Applies `q_des = q^n + action` for one control period. Does not reset
    /// on termination; the returned `frame` is then the terminal one.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if action.len() != N_J {
            return Err(EnvError::Action { got: action.len(), expected: N_J });
        }
        let dt = self.config.control_dt;
        let before = self.sim.state().clone();
        let mut q_des = [0.0; N_J];
        for j in 0..N_J {
            q_des[j] = self.nominal[j] + action[j];
        }
        let command = self.command.as_array();
        self.schedule_pushes();
        let (q_des_prev, q_des_prev2) = (self.episode.q_des_prev, self.episode.q_des_prev2);
        self.episode.shift_history(&arr(&before.q), &arr(&before.qd));
        self.episode.push_target(&q_des, &self.nominal);
        self.episode.step += 1;

        if let Err(e) = self.sim.step(&q_des, dt) {
            log::warn!("env {}: simulator fault at step {}: {e}", self.id, self.episode.step);
            self.episode.done = Some(TerminationCause::SimFault);
            let contacts = self.episode.contacts;
            return Ok(StepResult {
                frame: self.frame(),
                reward: RewardBreakdown::default(),
                done: true,
                cause: Some(TerminationCause::SimFault),
                terminal_frame: None,
                command,
                contacts,
            });
        }

        let s = self.sim.state();
        let out = self.sim.last();
        let contacts = self.contact_flags();
        let prev = self.episode.contacts;
        update_timers(&mut self.episode.t_swing, &mut self.episode.t_stance, &prev, &contacts, dt);
        self.episode.contacts = contacts;

        let qdd: Vec<f64> = s.qd.iter().zip(&before.qd).map(|(a, b)| (a - b) / dt).collect();
        let slip: Vec<[f64; 2]> = out.contacts.feet.iter().map(|f| f.slip_velocity).collect();
        let (g, lin_vel, ang_vel) = Self::body_terms(s);
        let (done, cause, _) = check_termination(&out.collisions, self.episode.step, self.config.max_steps);
        let inputs = RewardInputs {
            command,
            lin_vel,
            ang_vel,
            tilt: g[2].clamp(-1.0, 1.0).acos(),
            base_height: s.base_pos.z,
            r_n: self.robot.r_n,
            q: &s.q,
            q_nominal: &self.nominal,
            qd: &s.qd,
            qdd: &qdd,
            torques: &out.torques,
            q_des: &q_des,
            q_des_prev: &q_des_prev,
            q_des_prev2: &q_des_prev2,
            contacts: &contacts,
            foot_slip: &slip,
            t_swing: &self.episode.t_swing,
            collided: cause.is_some_and(|c| c.is_failure()),
        };
        let reward = compute_reward(&inputs);

        self.command.remaining -= dt;
        if self.command.remaining <= 1e-9 {
            self.command = sample_command(&mut self.rng, &self.config.commands);
        }
        self.episode.done = cause;
        Ok(StepResult { frame: self.frame(), reward, done, cause, terminal_frame: None, command, contacts })
    }
}
