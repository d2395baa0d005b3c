//! Robot sets: generation under the viability filter, partial resampling
//! and the versioned `robots.json` format.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{sample_morphology, MorphologyParams, SamplingOptions};
use super::reference::{reference, ReferenceModel};
use super::tree::{build_kinematic_tree, RobotModel};
use super::viability::{viability_check, ViabilityOptions, ViabilityOutcome};
use super::MorphologyError;
use crate::dynamics::SimConfig;
use crate::seeding::rng_for;

pub const SCHEMA_VERSION: u32 = 1;
const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct GenerationConfig {
    pub sampling: SamplingOptions,
    pub viability: ViabilityOptions,
    pub sim: SimConfig,
    /// Consecutive rejections allowed per robot requested; `None` means 1000.
    pub max_attempts_per_robot: Option<usize>,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotEntry {
    pub ref_id: u32,
    pub params: MorphologyParams,
    pub r_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSet {
    pub schema_version: u32,
    pub seed: u64,
    pub per_reference_count: usize,
    pub refs: Vec<u32>,
    pub robots: Vec<RobotEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub attempts: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub rejections: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub per_reference: BTreeMap<u32, ReferenceReport>,
}

fn outcome_name(o: ViabilityOutcome) -> String {
    serde_json::to_value(o).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

enum Candidate {
    Accepted(RobotModel),
    Rejected(String),
}

fn try_candidate(reference: &ReferenceModel, seed: u64, attempt: u64, cfg: &GenerationConfig) -> Candidate {
    let mut rng = rng_for(seed, &[reference.id as u64, attempt]);
    let params = sample_morphology(reference, &mut rng, &cfg.sampling);
    match build_kinematic_tree(&params, reference, &cfg.sampling.latency) {
        Ok(model) => {
            let outcome = viability_check(&model, &cfg.sim, &cfg.viability);
            if outcome.is_viable() {
                Candidate::Accepted(model)
            } else {
                Candidate::Rejected(outcome_name(outcome))
            }
        }
        Err(MorphologyError::Degenerate(_)) => Candidate::Rejected("degenerate".into()),
        Err(e) => Candidate::Rejected(e.to_string()),
    }
}

/// Samples robots of one reference until `count` pass the viability check.
/// Candidate `k` always uses the stream `(seed, ref_id, k)`, so the result
/// does not depend on how rayon schedules the chunks.
pub fn generate_for_reference(
    reference: &ReferenceModel,
    count: usize,
    seed: u64,
    cfg: &GenerationConfig,
) -> Result<(Vec<RobotModel>, ReferenceReport), MorphologyError> {
    let max_rejections = cfg.max_attempts_per_robot.unwrap_or(1000) * count.max(1);
    let mut accepted = Vec::with_capacity(count);
    let mut report = ReferenceReport::default();
    let mut consecutive = 0usize;
    let mut next = 0u64;
    while accepted.len() < count {
        let batch: Vec<Candidate> = (next..next + CHUNK as u64)
            .into_par_iter()
            .map(|k| try_candidate(reference, seed, k, cfg))
            .collect();
        next += CHUNK as u64;
        for c in batch {
            if accepted.len() == count {
                break;
            }
            report.attempts += 1;
            match c {
                Candidate::Accepted(m) => {
                    accepted.push(m);
                    consecutive = 0;
                }
                Candidate::Rejected(why) => {
                    *report.rejections.entry(why).or_default() += 1;
                    consecutive += 1;
                    if consecutive > max_rejections {
                        return Err(MorphologyError::GenerationExhausted { ref_id: reference.id, attempts: consecutive });
                    }
                }
            }
        }
    }
    report.accepted = accepted.len();
    report.acceptance_rate = report.accepted as f64 / report.attempts.max(1) as f64;
    Ok((accepted, report))
}

pub fn generate_robot_set(
    refs: &[u32],
    count: usize,
    seed: u64,
    cfg: &GenerationConfig,
) -> Result<(RobotSet, GenerationReport), MorphologyError> {
    if count == 0 {
        return Err(MorphologyError::InvalidCount);
    }
    let references = refs.iter().map(|&id| reference(id)).collect::<Result<Vec<_>, _>>()?;
    let mut robots = Vec::new();
    let mut report = GenerationReport::default();
    for r in &references {
        let (models, rep) = generate_for_reference(r, count, seed, cfg)?;
        log::info!("reference {}: {} robots, acceptance {:.3}", r.name, models.len(), rep.acceptance_rate);
        robots.extend(models.into_iter().map(|m| RobotEntry { ref_id: m.ref_id, params: m.params, r_n: m.r_n }));
        report.per_reference.insert(r.id, rep);
    }
    Ok((
        RobotSet { schema_version: SCHEMA_VERSION, seed, per_reference_count: count, refs: refs.to_vec(), robots },
        report,
    ))
}

/// Replaces `⌊fraction·|set|⌋` uniformly chosen members with fresh viable
/// robots of the same reference. Returns the new set and the replaced indices.
pub fn resample_fraction<R: Rng + ?Sized>(
    set: &RobotSet,
    fraction: f64,
    rng: &mut R,
    cfg: &GenerationConfig,
) -> Result<(RobotSet, Vec<usize>), MorphologyError> {
    if set.robots.is_empty() {
        return Err(MorphologyError::InvalidCount);
    }
    let n = set.robots.len();
    let k = ((fraction.clamp(0.0, 1.0) * n as f64) + 1e-9).floor() as usize;
    let mut indices = rand::seq::index::sample(rng, n, k).into_vec();
    indices.sort_unstable();
    let seeds: Vec<u64> = indices.iter().map(|_| rng.random()).collect();
    let replacements = indices
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&i, &s)| {
            let r = reference(set.robots[i].ref_id)?;
            let (mut models, _) = generate_for_reference(&r, 1, s, cfg)?;
            let m = models.remove(0);
            Ok(RobotEntry { ref_id: m.ref_id, params: m.params, r_n: m.r_n })
        })
        .collect::<Result<Vec<_>, MorphologyError>>()?;
    let mut out = set.clone();
    for (&i, e) in indices.iter().zip(replacements) {
        out.robots[i] = e;
    }
    Ok((out, indices))
}

impl RobotSet {
    pub fn len(&self) -> usize {
        self.robots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.robots.is_empty()
    }

    pub fn build(&self, index: usize) -> Result<RobotModel, MorphologyError> {
        let e = &self.robots[index];
        super::tree::assemble_model(&e.params, &reference(e.ref_id)?)
    }

    pub fn build_all(&self) -> Result<Vec<RobotModel>, MorphologyError> {
        (0..self.len()).map(|i| self.build(i)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("robot set serializes")
    }

    /// Parses and validates: schema version, supported ids, parameter
    /// bounds and that each stored `r_n` matches forward kinematics.
    pub fn from_json(text: &str, latency: &super::reference::Bounds) -> Result<Self, MorphologyError> {
        let set: RobotSet = serde_json::from_str(text).map_err(|e| MorphologyError::Format(e.to_string()))?;
        if set.schema_version != SCHEMA_VERSION {
            return Err(MorphologyError::Format(format!("unsupported schema_version {}", set.schema_version)));
        }
        for id in &set.refs {
            reference(*id)?;
        }
        for (i, e) in set.robots.iter().enumerate() {
            let r = reference(e.ref_id)?;
            let model = build_kinematic_tree(&e.params, &r, latency)?;
            if !((model.r_n - e.r_n).abs() <= 1e-9) {
                return Err(MorphologyError::Format(format!(
                    "robot {i}: stored r_n {} disagrees with kinematics {}",
                    e.r_n, model.r_n
                )));
            }
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), MorphologyError> {
        std::fs::write(path, self.to_json()).map_err(|e| MorphologyError::Io(e.to_string()))
    }

    pub fn load(path: &Path, latency: &super::reference::Bounds) -> Result<Self, MorphologyError> {
        let text = std::fs::read_to_string(path).map_err(|e| MorphologyError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, latency)
    }
}
