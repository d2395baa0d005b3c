//! Dynamics inference: the recurrent latent encoder, the explicit morphology
//! estimator used by the MorAL variant, the base velocity estimator, and the
//! offline training that ties the encoder to its data.

pub mod dataset;
pub mod label;
pub mod nets;
pub mod train;

pub use dataset::{DimDataset, Sequence, SequenceRecorder};
pub use label::{LabelSpace, LABEL_DIM};
pub use nets::{mse, velocity_estimator, DimNet, MoralEstimator, MoralOutput, MORAL_IN, MORAL_OUT};
pub use train::{dataset_loss, mean_label, mean_label_loss, predict_sequence, train_offline, DimEpoch, DimTrainConfig, DimTrainReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DimError {
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("io: {0}")]
    Io(String),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}
