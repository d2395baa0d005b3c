//! A batch of independent envs stepped in parallel.

use std::sync::Arc;

use rayon::prelude::*;

use super::observation::ObsFrame;
use super::single::{Env, StepResult};
use super::{EnvConfig, EnvError};
use crate::morphology::RobotModel;

pub type VecStep = Vec<StepResult>;

pub struct VecEnv {
    envs: Vec<Env>,
    robots: Vec<Arc<RobotModel>>,
}

/// Robot index for an env's `k`-th episode (counting from 0).
pub fn assignment(env_id: usize, episode: u64, n_env: usize, n_robots: usize) -> usize {
    ((env_id as u64 + episode * n_env as u64) % n_robots as u64) as usize
}

impl VecEnv {
    pub fn new(robots: Vec<Arc<RobotModel>>, n_env: usize, config: &EnvConfig, seed: u64) -> Result<Self, EnvError> {
        if robots.is_empty() {
            return Err(EnvError::NoRobots);
        }
        let n = robots.len();
        let envs = (0..n_env)
            .into_par_iter()
            .map(|id| Env::new(id, robots[assignment(id, 0, n_env, n)].clone(), config.clone(), seed))
            .collect();
        Ok(Self { envs, robots })
    }

    /// Wraps envs built elsewhere. Reassignment uses each env's `id` with
    /// `n_env = envs.len()`.
    pub fn from_envs(envs: Vec<Env>, robots: Vec<Arc<RobotModel>>) -> Result<Self, EnvError> {
        if robots.is_empty() {
            return Err(EnvError::NoRobots);
        }
        Ok(Self { envs, robots })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[Env] {
        &self.envs
    }

    pub fn envs_mut(&mut self) -> &mut [Env] {
        &mut self.envs
    }

    pub fn robots(&self) -> &[Arc<RobotModel>] {
        &self.robots
    }

    /// Replaces the robot pool. Running episodes keep their robot; the new
    /// pool is used from each env's next reset.
    pub fn set_robots(&mut self, robots: Vec<Arc<RobotModel>>) -> Result<(), EnvError> {
        if robots.is_empty() {
            return Err(EnvError::NoRobots);
        }
        self.robots = robots;
        Ok(())
    }

    pub fn frames(&self) -> Vec<ObsFrame> {
        self.envs.iter().map(Env::frame).collect()
    }

    fn next_robot(&self, env: &Env) -> Arc<RobotModel> {
        self.robots[assignment(env.id, env.episodes_started(), self.envs.len(), self.robots.len())].clone()
    }

    pub fn reset_all(&mut self) -> Vec<ObsFrame> {
        let robots: Vec<_> = self.envs.iter().map(|e| self.next_robot(e)).collect();
        self.envs.par_iter_mut().zip(robots).map(|(e, r)| e.reset(Some(r))).collect()
    }

    /// Steps every env; finished ones are reset onto their next robot and
    /// report the old episode's last frame in `terminal_frame`.
    pub fn step_all(&mut self, actions: &[Vec<f64>]) -> Result<VecStep, EnvError> {
        if actions.len() != self.envs.len() {
            return Err(EnvError::Action { got: actions.len(), expected: self.envs.len() });
        }
        let n_env = self.envs.len();
        let robots = &self.robots;
        self.envs
            .par_iter_mut()
            .zip(actions)
            .map(|(env, a)| {
                let mut r = env.step(a)?;
                if r.done {
                    let next = robots[assignment(env.id, env.episodes_started(), n_env, robots.len())].clone();
                    let new = env.reset(Some(next));
                    r.terminal_frame = Some(std::mem::replace(&mut r.frame, new));
                }
                Ok(r)
            })
            .collect()
    }
}
