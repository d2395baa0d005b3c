//! Reference quadrupeds: per-model sampling bounds, fixed template geometry
//! and the unrandomized stand-in parameters.

use serde::{Deserialize, Serialize};

use super::params::{LegConfiguration, MorphologyParams};
use super::MorphologyError;
use crate::dynamics::ActuatorMode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn union(&self, other: &Bounds) -> Bounds {
        Bounds::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }
}

const fn b(lo: f64, hi: f64) -> Bounds {
    Bounds::new(lo, hi)
}

/// Uniform sampling bounds. Offsets are in "table space": x of the hip
/// offset is measured forward for front legs and backward for hind legs,
/// y outward-positive on the left and mirrored on the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingTable {
    /// Base to hip-abduction joint.
    pub c_q1: [Bounds; 3],
    /// Abduction to flexion joint.
    pub c_q2: [Bounds; 3],
    /// Flexion to knee joint.
    pub c_q3: [Bounds; 3],
    pub c_fz: Bounds,
    pub m_base: Bounds,
    pub m_hip: Bounds,
    pub m_thigh: Bounds,
    pub m_shank: Bounds,
    pub q_abduction: Bounds,
    pub q_flexion: Bounds,
    pub q_knee_a: Bounds,
    pub q_knee_x: Bounds,
    pub kp: Bounds,
    pub kd: Bounds,
    pub tau_max: Bounds,
    pub mu_f: Bounds,
}

impl SamplingTable {
    /// Flattened `(name, bounds)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(String, Bounds)> {
        let mut out = Vec::new();
        for (name, arr) in [("c_q1", &self.c_q1), ("c_q2", &self.c_q2), ("c_q3", &self.c_q3)] {
            for (axis, bd) in ["x", "y", "z"].iter().zip(arr.iter()) {
                out.push((format!("{name}_{axis}"), *bd));
            }
        }
        for (name, bd) in [
            ("c_fz", self.c_fz),
            ("m_base", self.m_base),
            ("m_hip", self.m_hip),
            ("m_thigh", self.m_thigh),
            ("m_shank", self.m_shank),
            ("q_abduction", self.q_abduction),
            ("q_flexion", self.q_flexion),
            ("q_knee_a", self.q_knee_a),
            ("q_knee_x", self.q_knee_x),
            ("kp", self.kp),
            ("kd", self.kd),
            ("tau_max", self.tau_max),
            ("mu_f", self.mu_f),
        ] {
            out.push((name.to_string(), bd));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub id: u32,
    pub name: String,
    pub sampling_table: SamplingTable,
    /// Template knee-to-foot length before the sampled foot-frame offset.
    pub shank_length: f64,
    pub defaults: MorphologyParams,
}

pub const SUPPORTED_IDS: [u32; 4] = [1, 2, 4, 5];

const SHARED_FOOT: Bounds = b(-0.025, 0.12);
const SHARED_ABDUCTION: Bounds = b(-0.15, 0.15);
const SHARED_FLEXION: Bounds = b(0.3, 0.9);
const KNEE_A: Bounds = b(-1.8, -0.7);
const KNEE_X: Bounds = b(-1.2, -0.6);
const SHARED_KD: Bounds = b(0.2, 3.0);
const SHARED_MU: Bounds = b(0.2, 1.1);

fn table(
    c_q1: [Bounds; 3],
    c_q2: [Bounds; 3],
    c_q3: [Bounds; 3],
    masses: [Bounds; 4],
    kp: Bounds,
    tau_max: Bounds,
) -> SamplingTable {
    SamplingTable {
        c_q1,
        c_q2,
        c_q3,
        c_fz: SHARED_FOOT,
        m_base: masses[0],
        m_hip: masses[1],
        m_thigh: masses[2],
        m_shank: masses[3],
        q_abduction: SHARED_ABDUCTION,
        q_flexion: SHARED_FLEXION,
        q_knee_a: KNEE_A,
        q_knee_x: KNEE_X,
        kp,
        kd: SHARED_KD,
        tau_max,
        mu_f: SHARED_MU,
    }
}

#[allow(clippy::too_many_arguments)]
fn stand_in(
    c_q1: [f64; 3],
    c_q2: [f64; 3],
    c_q3: [f64; 3],
    masses: [f64; 4],
    nominal: [f64; 3],
    configuration: LegConfiguration,
    gains: [f64; 3],
) -> MorphologyParams {
    let mut joint_offsets = Vec::with_capacity(12);
    for _ in 0..4 {
        joint_offsets.push(c_q1);
        joint_offsets.push(c_q2);
        joint_offsets.push(c_q3);
    }
    MorphologyParams {
        joint_offsets,
        foot_offsets: vec![0.0; 4],
        base_mass: masses[0],
        link_masses: (0..4).flat_map(|_| [masses[1], masses[2], masses[3]]).collect(),
        nominal: (0..4).flat_map(|_| nominal).collect(),
        configuration,
        kp: gains[0],
        kd: gains[1],
        tau_max: gains[2],
        friction: vec![0.8; 4],
        latency: 0.0,
        actuator: ActuatorMode::IdealPd,
    }
}

pub fn reference(id: u32) -> Result<ReferenceModel, MorphologyError> {
    let r = match id {
        1 => ReferenceModel {
            id,
            name: "a1".into(),
            sampling_table: table(
                [b(0.15, 0.4), b(0.0, 0.25), b(-0.1, 0.12)],
                [b(-0.1, 0.1), b(-0.04, 0.13), b(-0.1, 0.1)],
                [b(-0.05, 0.18), b(-0.05, 0.1), b(-0.24, -0.12)],
                [b(2.0, 28.0), b(0.25, 1.0), b(0.5, 4.0), b(0.08, 0.9)],
                b(15.0, 80.0),
                b(15.0, 120.0),
            ),
            shank_length: 0.2,
            defaults: stand_in(
                [0.183, 0.047, 0.0],
                [0.0, 0.085, 0.0],
                [0.0, 0.0, -0.2],
                [6.0, 0.7, 1.0, 0.2],
                [0.0, 0.8, -1.5],
                LegConfiguration::A,
                [40.0, 2.0, 33.0],
            ),
        },
        2 => ReferenceModel {
            id,
            name: "aliengo".into(),
            sampling_table: table(
                [b(0.15, 0.45), b(0.0, 0.25), b(-0.1, 0.12)],
                [b(-0.1, 0.1), b(0.04, 0.12), b(-0.06, 0.1)],
                [b(-0.05, 0.15), b(-0.05, 0.1), b(-0.28, -0.1)],
                [b(4.0, 30.0), b(0.25, 2.6), b(0.4, 3.0), b(0.1, 0.5)],
                b(15.0, 80.0),
                b(15.0, 50.0),
            ),
            shank_length: 0.25,
            defaults: stand_in(
                [0.24, 0.051, 0.0],
                [0.0, 0.083, 0.0],
                [0.0, 0.0, -0.25],
                [10.0, 1.0, 1.5, 0.25],
                [0.0, 0.8, -1.5],
                LegConfiguration::A,
                [80.0, 3.0, 44.0],
            ),
        },
        4 => ReferenceModel {
            id,
            name: "anymal_b".into(),
            sampling_table: table(
                [b(0.225, 0.45), b(0.05, 0.23), b(-0.18, 0.18)],
                [b(-0.1, 0.15), b(0.015, 0.12), b(-0.07, 0.07)],
                [b(-0.1, 0.1), b(-0.05, 0.16), b(-0.35, -0.18)],
                [b(6.0, 40.0), b(0.5, 3.0), b(0.6, 4.5), b(0.15, 0.6)],
                b(30.0, 120.0),
                b(40.0, 80.0),
            ),
            shank_length: 0.32,
            defaults: stand_in(
                [0.277, 0.116, 0.0],
                [0.0635, 0.041, 0.0],
                [0.0, 0.1, -0.25],
                [16.0, 1.4, 1.6, 0.3],
                [0.0, 0.6, -1.0],
                LegConfiguration::X,
                [80.0, 2.0, 60.0],
            ),
        },
        5 => ReferenceModel {
            id,
            name: "anymal_c".into(),
            sampling_table: table(
                [b(0.18, 0.5), b(0.05, 0.27), b(-0.22, 0.15)],
                [b(-0.1, 0.2), b(-0.15, -0.05), b(-0.1, 0.06)],
                [b(-0.1, 0.2), b(-0.2, 0.15), b(-0.35, -0.18)],
                [b(18.0, 50.0), b(1.4, 4.0), b(1.8, 5.0), b(0.25, 1.0)],
                b(35.0, 120.0),
                b(40.0, 140.0),
            ),
            shank_length: 0.33,
            defaults: stand_in(
                [0.3, 0.104, 0.0],
                [0.06, -0.08, 0.0],
                [0.0, 0.1, -0.285],
                [28.0, 2.0, 2.5, 0.5],
                [0.0, 0.6, -1.0],
                LegConfiguration::X,
                [85.0, 2.5, 80.0],
            ),
        },
        other => return Err(MorphologyError::UnsupportedReference(other)),
    };
    Ok(r)
}

/// Looks a reference up by id or by name (`a1`, `aliengo`, `anymal_b`,
/// `anymal_c`, optionally suffixed with `_ref`).
pub fn reference_by_name(name: &str) -> Result<ReferenceModel, MorphologyError> {
    if let Ok(id) = name.parse::<u32>() {
        return reference(id);
    }
    let key = name.trim_end_matches("_ref");
    SUPPORTED_IDS
        .iter()
        .map(|&id| reference(id).expect("supported id"))
        .find(|r| r.name == key)
        .ok_or_else(|| MorphologyError::UnknownReferenceName(name.to_string()))
}

/// Elementwise union of the bounds of several references.
pub fn union_table(refs: &[ReferenceModel]) -> SamplingTable {
    let mut t = refs[0].sampling_table.clone();
    for r in &refs[1..] {
        let o = &r.sampling_table;
        for k in 0..3 {
            t.c_q1[k] = t.c_q1[k].union(&o.c_q1[k]);
            t.c_q2[k] = t.c_q2[k].union(&o.c_q2[k]);
            t.c_q3[k] = t.c_q3[k].union(&o.c_q3[k]);
        }
        t.c_fz = t.c_fz.union(&o.c_fz);
        t.m_base = t.m_base.union(&o.m_base);
        t.m_hip = t.m_hip.union(&o.m_hip);
        t.m_thigh = t.m_thigh.union(&o.m_thigh);
        t.m_shank = t.m_shank.union(&o.m_shank);
        t.kp = t.kp.union(&o.kp);
        t.kd = t.kd.union(&o.kd);
        t.tau_max = t.tau_max.union(&o.tau_max);
        t.mu_f = t.mu_f.union(&o.mu_f);
    }
    t
}
