//! Floating-base rigid-body simulation with penalty contact and PD actuation.

pub mod aba;
pub mod actuation;
pub mod contact;
pub mod dense;
pub mod multibody;
pub mod sim;
pub mod spatial;

pub use actuation::{ActuatorGains, ActuatorMode, Derating, LatencyBuffer};
pub use contact::{CollisionEvents, ContactInfo, ContactParams, FootContact};
pub use multibody::{Body, CollisionSphere, FootPoint, Kinematics, Multibody, SphereRole};
pub use sim::{forward_dynamics, Actuation, Push, SimConfig, SimSnapshot, SimState, Simulator, StepOutput};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("singular {0}")]
    Singular(String),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}
