//! Evaluation: success rates under perturbation sweeps, command tracking and
//! velocity-estimate RMSE, and zero-shot transfer tables.

pub mod grid;
pub mod metrics;
pub mod rollout;
pub mod sweep;
pub mod zero_shot;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::env::EnvError;
use crate::morphology::MorphologyError;
use crate::nn::NnError;

pub use grid::parse_grid;
pub use metrics::{estimator_rmse, success_rate, tracking_rmse, EstimatorRow, MetricError, TrackingStep};
pub use rollout::{eval_env_config, run_rollouts, Rollout, RolloutProtocol};
pub use sweep::{perturbed_model, robustness_sweep, SweepKind, SweepPoint, SweepResult, SweepRow, SweepSpec};
pub use zero_shot::{reference_models, tracking_eval, zero_shot_eval, EvalModel, PolicyUnderTest, ReportRow, ZeroShotProtocol};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error("model {0} appears in the training set of {1}")]
    SeenModel(String, String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(EvalError::from)).collect()
}
