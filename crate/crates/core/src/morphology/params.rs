//! Sampled morphology parameters and their mapping to signed per-leg geometry.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::reference::{Bounds, ReferenceModel};
use super::MorphologyError;
use crate::dynamics::ActuatorMode;

pub const N_LEGS: usize = 4;
pub const N_JOINTS: usize = 12;
pub const LEG_NAMES: [&str; 4] = ["fl", "fr", "hl", "hr"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegConfiguration {
    /// All knees point backwards.
    A,
    /// Knees point towards the base centre: hind flexion and knee angles are mirrored.
    X,
}

/// Per-robot parameters in table space (unsigned, as drawn from the
/// sampling table). Joint `3·leg + k` is abduction (k = 0), flexion (1) or
/// knee (2); legs are ordered FL, FR, HL, HR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphologyParams {
    /// Offset of each joint from its parent joint.
    pub joint_offsets: Vec<[f64; 3]>,
    pub foot_offsets: Vec<f64>,
    pub base_mass: f64,
    /// Hip, thigh and shank mass per leg.
    pub link_masses: Vec<f64>,
    pub nominal: Vec<f64>,
    pub configuration: LegConfiguration,
    pub kp: f64,
    pub kd: f64,
    pub tau_max: f64,
    pub friction: Vec<f64>,
    /// Actuation delay (s).
    pub latency: f64,
    pub actuator: ActuatorMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingOptions {
    pub latency: Bounds,
    /// Probability of the derating actuator model.
    pub nonlinear_probability: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self { latency: Bounds::new(0.0, 0.02), nonlinear_probability: 0.5 }
    }
}

pub fn is_front(leg: usize) -> bool {
    leg < 2
}

pub fn is_left(leg: usize) -> bool {
    leg.is_multiple_of(2)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, bd: &Bounds) -> f64 {
    if bd.hi > bd.lo {
        rng.random_range(bd.lo..=bd.hi)
    } else {
        bd.lo
    }
}

pub fn sample_morphology<R: Rng + ?Sized>(
    reference: &ReferenceModel,
    rng: &mut R,
    opts: &SamplingOptions,
) -> MorphologyParams {
    let t = &reference.sampling_table;
    let configuration = if rng.random_bool(0.5) { LegConfiguration::A } else { LegConfiguration::X };
    let knee = match configuration {
        LegConfiguration::A => t.q_knee_a,
        LegConfiguration::X => t.q_knee_x,
    };
    // One draw per table row, shared by every joint the row lists; the
    // flexion row is listed separately for front and hind legs.
    let offsets: Vec<[f64; 3]> = [&t.c_q1, &t.c_q2, &t.c_q3]
        .iter()
        .map(|row| [uniform(rng, &row[0]), uniform(rng, &row[1]), uniform(rng, &row[2])])
        .collect();
    let masses = [uniform(rng, &t.m_hip), uniform(rng, &t.m_thigh), uniform(rng, &t.m_shank)];
    let abduction = uniform(rng, &t.q_abduction);
    let flexion_front = uniform(rng, &t.q_flexion);
    let flexion_hind = uniform(rng, &t.q_flexion);
    let knee_angle = uniform(rng, &knee);
    let c_fz = uniform(rng, &t.c_fz);
    let mut joint_offsets = Vec::with_capacity(N_JOINTS);
    let mut link_masses = Vec::with_capacity(N_JOINTS);
    let mut nominal = Vec::with_capacity(N_JOINTS);
    for leg in 0..N_LEGS {
        joint_offsets.extend(offsets.iter().copied());
        link_masses.extend(masses);
        let flexion = if is_front(leg) { flexion_front } else { flexion_hind };
        nominal.extend([abduction, flexion, knee_angle]);
    }
    let foot_offsets = vec![c_fz; N_LEGS];
    let friction: Vec<f64> = (0..N_LEGS).map(|_| uniform(rng, &t.mu_f)).collect();
    let base_mass = uniform(rng, &t.m_base);
    let kp = uniform(rng, &t.kp);
    let kd = uniform(rng, &t.kd);
    let tau_max = uniform(rng, &t.tau_max);
    let latency = uniform(rng, &opts.latency);
    let actuator = if rng.random_bool(opts.nonlinear_probability.clamp(0.0, 1.0)) {
        ActuatorMode::Nonlinear
    } else {
        ActuatorMode::IdealPd
    };
    MorphologyParams {
        joint_offsets,
        foot_offsets,
        base_mass,
        link_masses,
        nominal,
        configuration,
        kp,
        kd,
        tau_max,
        friction,
        latency,
        actuator,
    }
}

impl MorphologyParams {
    /// Joint offset in the parent frame with front/hind and left/right
    /// mirroring applied. Hind hips always sit at −x; in configuration X the
    /// whole hind leg is the fore-aft mirror image of the front one.
    pub fn signed_offset(&self, joint: usize) -> Vector3<f64> {
        let leg = joint / 3;
        let c = self.joint_offsets[joint];
        let mirror_x = !is_front(leg) && (joint.is_multiple_of(3) || self.configuration == LegConfiguration::X);
        let sx = if mirror_x { -1.0 } else { 1.0 };
        let sy = if is_left(leg) { 1.0 } else { -1.0 };
        Vector3::new(sx * c[0], sy * c[1], c[2])
    }

    /// Signed nominal joint angles `q^n`.
    pub fn nominal_joint_config(&self) -> Vec<f64> {
        (0..N_JOINTS)
            .map(|j| {
                let leg = j / 3;
                let v = self.nominal[j];
                match j % 3 {
                    0 => {
                        if is_left(leg) {
                            v
                        } else {
                            -v
                        }
                    }
                    _ => {
                        if self.configuration == LegConfiguration::X && !is_front(leg) {
                            -v
                        } else {
                            v
                        }
                    }
                }
            })
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.base_mass + self.link_masses.iter().sum::<f64>()
    }

    pub fn check_shapes(&self) -> Result<(), MorphologyError> {
        let ok = self.joint_offsets.len() == N_JOINTS
            && self.link_masses.len() == N_JOINTS
            && self.nominal.len() == N_JOINTS
            && self.foot_offsets.len() == N_LEGS
            && self.friction.len() == N_LEGS;
        if ok {
            Ok(())
        } else {
            Err(MorphologyError::Degenerate("parameter arrays have the wrong length".into()))
        }
    }

    /// Checks every field against the reference bounds and the latency range.
    pub fn validate(&self, reference: &ReferenceModel, latency: &Bounds) -> Result<(), MorphologyError> {
        self.check_shapes()?;
        let t = &reference.sampling_table;
        let check = |field: String, x: f64, bd: &Bounds| -> Result<(), MorphologyError> {
            if x.is_finite() && bd.contains(x) {
                Ok(())
            } else {
                Err(MorphologyError::OutOfBounds { field, value: x, lo: bd.lo, hi: bd.hi })
            }
        };
        let knee = match self.configuration {
            LegConfiguration::A => t.q_knee_a,
            LegConfiguration::X => t.q_knee_x,
        };
        for leg in 0..N_LEGS {
            for k in 0..3 {
                let j = 3 * leg + k;
                let table = [&t.c_q1, &t.c_q2, &t.c_q3][k];
                for a in 0..3 {
                    check(format!("joint_offsets[{j}][{a}]"), self.joint_offsets[j][a], &table[a])?;
                }
                let mb = [&t.m_hip, &t.m_thigh, &t.m_shank][k];
                check(format!("link_masses[{j}]"), self.link_masses[j], mb)?;
                let nb = [&t.q_abduction, &t.q_flexion, &knee][k];
                check(format!("nominal[{j}]"), self.nominal[j], nb)?;
            }
            check(format!("foot_offsets[{leg}]"), self.foot_offsets[leg], &t.c_fz)?;
            check(format!("friction[{leg}]"), self.friction[leg], &t.mu_f)?;
        }
        check("base_mass".into(), self.base_mass, &t.m_base)?;
        check("kp".into(), self.kp, &t.kp)?;
        check("kd".into(), self.kd, &t.kd)?;
        check("tau_max".into(), self.tau_max, &t.tau_max)?;
        check("latency".into(), self.latency, latency)?;
        Ok(())
    }
}
