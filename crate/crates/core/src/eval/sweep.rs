//! Success-rate sweeps over one perturbation parameter.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::success_rate;
use super::rollout::{eval_env_config, run_rollouts, RolloutProtocol};
use super::EvalError;
use crate::env::{EnvConfig, PushSchedule, TerminationCause};
use crate::morphology::{assemble_model, reference, RobotEntry, RobotModel};
use crate::ppo::Agent;
use crate::seeding::{derive_seed, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Horizontal force (N), 0.2 s every 2 s in a random direction.
    PushForce,
    /// Foot friction coefficient, all feet.
    Friction,
    /// Actuation latency (s).
    Latency,
    /// Added base mass (kg).
    BaseMassDelta,
}

impl SweepKind {
    pub const ALL: [SweepKind; 4] = [Self::PushForce, Self::Friction, Self::Latency, Self::BaseMassDelta];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PushForce => "push_force",
            Self::Friction => "friction",
            Self::Latency => "latency",
            Self::BaseMassDelta => "base_mass_delta",
        }
    }

    /// Default grid, reported with the results.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Self::PushForce => vec![0.0, 50.0, 100.0, 150.0, 200.0, 250.0],
            Self::Friction => vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
            Self::Latency => vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            Self::BaseMassDelta => vec![-2.0, 0.0, 2.0, 4.0, 6.0, 8.0],
        }
    }

    /// The unperturbed value of this parameter for `robot`.
    pub fn nominal(self, robot: &RobotEntry) -> f64 {
        match self {
            Self::PushForce | Self::BaseMassDelta => 0.0,
            Self::Friction => robot.params.friction.iter().sum::<f64>() / robot.params.friction.len() as f64,
            Self::Latency => robot.params.latency,
        }
    }
}

impl std::fmt::Display for SweepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "push_force" | "push" => Ok(Self::PushForce),
            "friction" => Ok(Self::Friction),
            "latency" => Ok(Self::Latency),
            "base_mass_delta" | "mass" => Ok(Self::BaseMassDelta),
            _ => Err(format!("unknown sweep kind {s:?} (push_force, friction, latency, base_mass_delta)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub protocol: RolloutProtocol,
    #[serde(default)]
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, grid: Vec<f64>, seed: u64) -> Self {
        Self { kind, grid, protocol: RolloutProtocol::default(), seed }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        self.protocol.validate()?;
        if self.grid.is_empty() || self.grid.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::Grid("grid must be non-empty and finite".into()));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EvalError::Grid("grid must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Seed of one grid point; independent of the other points.
    pub fn point_seed(&self, value: f64) -> u64 {
        derive_seed(self.seed, &[tag("sweep"), tag(self.kind.as_str()), value.to_bits()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub sr: f64,
    pub n_fail: usize,
    /// Rollouts counted, simulator faults excluded.
    pub n_total: usize,
    pub n_fault: usize,
    pub causes: BTreeMap<TerminationCause, usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub points: Vec<SweepPoint>,
}

/// Flat `sweep.csv` row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: String,
    pub value: f64,
    pub sr: f64,
    pub n_fail: usize,
    pub n_total: usize,
    pub n_sim_fault: usize,
    pub n_ground_collision: usize,
    pub n_self_collision: usize,
    pub n_timeout: usize,
    pub seed: u64,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points
            .iter()
            .map(|p| {
                let c = |k| p.causes.get(&k).copied().unwrap_or(0);
                SweepRow {
                    kind: self.kind.as_str().into(),
                    value: p.value,
                    sr: p.sr,
                    n_fail: p.n_fail,
                    n_total: p.n_total,
                    n_sim_fault: c(TerminationCause::SimFault),
                    n_ground_collision: c(TerminationCause::GroundCollision),
                    n_self_collision: c(TerminationCause::SelfCollision),
                    n_timeout: c(TerminationCause::Timeout),
                    seed: p.seed,
                }
            })
            .collect()
    }

    /// Whether the grid point closest to `nominal` has a success rate at
    /// least that of both grid ends. Reported, never enforced.
    pub fn nominal_dominates(&self, nominal: f64) -> Option<bool> {
        let best = self.points.iter().min_by(|a, b| (a.value - nominal).abs().total_cmp(&(b.value - nominal).abs()))?;
        let (first, last) = (self.points.first()?, self.points.last()?);
        Some(best.sr >= first.sr && best.sr >= last.sr)
    }
}

/// The robot with one parameter overridden. Push sweeps leave the model alone.
pub fn perturbed_model(robot: &RobotEntry, kind: SweepKind, value: f64) -> Result<RobotModel, EvalError> {
    let mut p = robot.params.clone();
    match kind {
        SweepKind::PushForce => {}
        SweepKind::Friction => p.friction.iter_mut().for_each(|f| *f = value),
        SweepKind::Latency => {
            if value < 0.0 {
                return Err(EvalError::Config(format!("negative latency {value}")));
            }
            p.latency = value;
        }
        SweepKind::BaseMassDelta => p.base_mass += value,
    }
    Ok(assemble_model(&p, &reference(robot.ref_id)?)?)
}

pub fn robustness_sweep(agent: &Agent, robot: &RobotEntry, base: &EnvConfig, spec: &SweepSpec) -> Result<SweepResult, EvalError> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.grid.len());
    for &value in &spec.grid {
        let model = Arc::new(perturbed_model(robot, spec.kind, value)?);
        let mut cfg = eval_env_config(base, &spec.protocol);
        if spec.kind == SweepKind::PushForce {
            cfg.push = Some(PushSchedule::with_force(value));
        }
        let seed = spec.point_seed(value);
        let seeds: Vec<u64> = (0..spec.protocol.rollouts as u64).map(|i| derive_seed(seed, &[i])).collect();
        let rollouts = run_rollouts(agent, &model, &cfg, &seeds, false, 0)?;
        let mut causes = BTreeMap::new();
        for r in &rollouts {
            *causes.entry(r.cause).or_insert(0) += 1;
        }
        let counted: Vec<TerminationCause> =
            rollouts.iter().map(|r| r.cause).filter(|&c| c != TerminationCause::SimFault).collect();
        let n_fault = rollouts.len() - counted.len();
        if n_fault > 0 {
            log::warn!("{} = {value}: {n_fault} rollouts hit a simulator fault and are excluded", spec.kind);
        }
        let sr = success_rate(&counted)?;
        points.push(SweepPoint {
            value,
            sr,
            n_fail: counted.iter().filter(|c| c.is_failure()).count(),
            n_total: counted.len(),
            n_fault,
            causes,
            seed,
        });
    }
    Ok(SweepResult { kind: spec.kind, points })
}
