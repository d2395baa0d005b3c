//! Procedural quadruped generation from reference models.

pub mod params;
pub mod reference;
pub mod set;
pub mod tree;
pub mod viability;

pub use params::{sample_morphology, LegConfiguration, MorphologyParams, SamplingOptions, N_JOINTS, N_LEGS};
pub use reference::{reference, reference_by_name, Bounds, ReferenceModel, SamplingTable, SUPPORTED_IDS};
pub use set::{generate_for_reference, generate_robot_set, resample_fraction, GenerationConfig, GenerationReport, ReferenceReport, RobotEntry, RobotSet};
pub use tree::{assemble_model, build_kinematic_tree, RobotModel};
pub use viability::{viability_check, ViabilityOptions, ViabilityOutcome};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MorphologyError {
    #[error("unsupported reference id {0} (supported: 1, 2, 4, 5)")]
    UnsupportedReference(u32),
    #[error("unknown reference model {0:?}")]
    UnknownReferenceName(String),
    #[error("degenerate morphology: {0}")]
    Degenerate(String),
    #[error("{field} = {value} outside [{lo}, {hi}]")]
    OutOfBounds { field: String, value: f64, lo: f64, hi: f64 },
    #[error("reference {ref_id}: {attempts} consecutive candidates failed the viability check")]
    GenerationExhausted { ref_id: u32, attempts: usize },
    #[error("robot count must be at least 1")]
    InvalidCount,
    #[error("robot file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}
