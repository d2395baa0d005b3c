//! The locomotion MDP: commands, observations, rewards and episodes, for one
//! robot or a batch of them.

pub mod command;
pub mod episode;
pub mod logger;
pub mod observation;
pub mod reward;
pub mod single;
pub mod vector;

use serde::{Deserialize, Serialize};

use crate::dynamics::{SimConfig, SimulationError};

pub use command::{sample_command, Command, CommandRanges};
pub use episode::{check_termination, update_timers, EpisodeState, TerminationCause};
pub use logger::EpisodeLogger;
pub use observation::{
    assemble_observation, layout, ObsFrame, ObsScales, ObservationBundle, EST_OBS_DIM, LATENT_DIM, N_J, OBS_DIM, X_DIM,
};
pub use reward::{compute_reward, RewardBreakdown, RewardInputs};
pub use single::{Env, EnvSnapshot, StepResult};
pub use vector::{VecEnv, VecStep};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("observation: {0}")]
    Observation(String),
    #[error("action has {got} entries, expected {expected}")]
    Action { got: usize, expected: usize },
    #[error("simulation: {0}")]
    Simulation(#[from] SimulationError),
    #[error("no robots to assign")]
    NoRobots,
}

/// Periodic horizontal shove in a random direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushSchedule {
    /// Force magnitude (N).
    pub force: f64,
    pub duration: f64,
    pub period: f64,
}

impl PushSchedule {
    pub fn with_force(force: f64) -> Self {
        Self { force, duration: 0.2, period: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub control_dt: f64,
    pub max_steps: usize,
    pub commands: CommandRanges,
    /// Drop height above `r_n` at reset (m).
    pub init_clearance: f64,
    /// Half width of the uniform joint perturbation at reset (rad).
    pub init_joint_noise: f64,
    pub scales: ObsScales,
    pub sim: SimConfig,
    pub push: Option<PushSchedule>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            control_dt: 0.01,
            max_steps: 600,
            commands: CommandRanges::default(),
            init_clearance: 0.02,
            init_joint_noise: 0.05,
            scales: ObsScales::default(),
            sim: SimConfig::default(),
            push: None,
        }
    }
}
