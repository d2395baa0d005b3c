//! PPO training of the control policy with GAE, env-stream minibatches, a
//! KL-adaptive learning rate, periodic robot resampling and the concurrent
//! supervised estimators.

pub mod agent;
pub mod buffer;
pub mod config;
pub mod gae;
pub mod trainer;
pub mod update;

pub use agent::{Agent, StepViews};
pub use buffer::{collect_rollouts, EpisodeEnd, RolloutState, TrajectoryBatch};
pub use config::{PpoConfig, Variant};
pub use gae::{compute_gae, normalize};
pub use trainer::{IterationMetrics, Trainer};
pub use update::{adapt_lr, estimator_update, gaussian_kl, ppo_update, surrogate, value_loss, Optimizers, UpdateStats};

use crate::dim::DimError;
use crate::env::EnvError;
use crate::morphology::MorphologyError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum PpoError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dim(#[from] DimError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("interrupted")]
    Interrupted,
}
