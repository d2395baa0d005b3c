//! Assembly of the simulated multibody from morphology parameters.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::params::{MorphologyParams, LEG_NAMES, N_LEGS};
use super::reference::ReferenceModel;
use super::MorphologyError;
use crate::dynamics::spatial::RigidInertia;
use crate::dynamics::{
    Actuation, ActuatorGains, Body, CollisionSphere, FootPoint, LatencyBuffer, Multibody, SimState, SphereRole,
};

pub const JOINT_ARMATURE: f64 = 0.005;
pub const FOOT_RADIUS: f64 = 0.02;
const MIN_SEGMENT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub ref_id: u32,
    pub params: MorphologyParams,
    pub multibody: Multibody,
    /// Signed nominal joint angles.
    pub nominal: Vec<f64>,
    /// Base height at `q^n` with the lowest foot on the ground and the base level.
    pub r_n: f64,
}

/// Link radius used for inertia and collision spheres.
pub fn link_radius(length: f64) -> f64 {
    (0.12 * length).clamp(0.015, 0.04)
}

/// Solid capsule of length `seg.norm()` along `seg`, about its centre.
pub fn capsule_inertia(mass: f64, seg: &Vector3<f64>, radius: f64) -> Matrix3<f64> {
    let len = seg.norm();
    let v_cyl = std::f64::consts::PI * radius * radius * len;
    let v_sph = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
    let m_cyl = mass * v_cyl / (v_cyl + v_sph);
    let m_sph = mass - m_cyl;
    let r2 = radius * radius;
    let axial = m_cyl * r2 / 2.0 + m_sph * 2.0 * r2 / 5.0;
    let perp = m_cyl * (len * len / 12.0 + r2 / 4.0)
        + m_sph * (2.0 * r2 / 5.0 + len * len / 4.0 + 3.0 * len * radius / 8.0);
    if len < 1e-12 {
        return Matrix3::identity() * axial;
    }
    let d = seg / len;
    let ddt = d * d.transpose();
    (Matrix3::identity() - ddt) * perp + ddt * axial
}

pub fn box_inertia(mass: f64, half: &Vector3<f64>) -> Matrix3<f64> {
    let (x2, y2, z2) = (half.x * half.x, half.y * half.y, half.z * half.z);
    Matrix3::from_diagonal(&Vector3::new(y2 + z2, x2 + z2, x2 + y2)) * (mass / 3.0)
}

/// Knee-to-foot vector in the shank frame.
pub fn foot_vector(reference_shank: f64, c_fz: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -(reference_shank + c_fz))
}

/// Validates `params` against the reference bounds, then assembles the model.
pub fn build_kinematic_tree(
    params: &MorphologyParams,
    reference: &ReferenceModel,
    latency: &super::reference::Bounds,
) -> Result<RobotModel, MorphologyError> {
    params.validate(reference, latency)?;
    assemble_model(params, reference)
}

/// Assembles the model without bounds checks (evaluation overrides push
/// parameters past the sampling table on purpose).
pub fn assemble_model(params: &MorphologyParams, reference: &ReferenceModel) -> Result<RobotModel, MorphologyError> {
    params.check_shapes()?;
    if params.base_mass <= 0.0 || params.link_masses.iter().any(|m| !(*m > 0.0)) {
        return Err(MorphologyError::Degenerate("masses must be positive".into()));
    }
    let mut bodies = Vec::with_capacity(12);
    let mut feet = Vec::with_capacity(N_LEGS);
    let mut spheres = Vec::new();
    let mut hx: f64 = 0.05;
    let mut hy: f64 = 0.03;
    for leg in 0..N_LEGS {
        let j0 = 3 * leg;
        let c1 = params.signed_offset(j0);
        let c2 = params.signed_offset(j0 + 1);
        let c3 = params.signed_offset(j0 + 2);
        if c3.z.abs() < MIN_SEGMENT {
            return Err(MorphologyError::Degenerate(format!("leg {leg}: |c_q3,z| below 1 cm")));
        }
        let foot = foot_vector(reference.shank_length, params.foot_offsets[leg]);
        if foot.norm() < MIN_SEGMENT {
            return Err(MorphologyError::Degenerate(format!("leg {leg}: zero-length shank")));
        }
        hx = hx.max(c1.x.abs());
        hy = hy.max(c1.y.abs());
        let segs = [c2, c3, foot];
        let axes = [Vector3::x(), Vector3::y(), Vector3::y()];
        let offsets = [c1, c2, c3];
        let names = ["hip", "thigh", "shank"];
        for k in 0..3 {
            let m = params.link_masses[j0 + k];
            let seg = segs[k];
            let r = link_radius(seg.norm());
            bodies.push(Body {
                name: format!("{}_{}", LEG_NAMES[leg], names[k]),
                parent: if k == 0 { None } else { Some(j0 + k - 1) },
                axis: axes[k],
                offset: offsets[k],
                inertia: RigidInertia::new(m, seg * 0.5, capsule_inertia(m, &seg, r)),
                armature: JOINT_ARMATURE,
            });
        }
        let r_thigh = link_radius(c3.norm());
        let r_shank = link_radius(foot.norm());
        spheres.push(CollisionSphere { body: Some(j0 + 1), center: c3 * 0.5, radius: r_thigh, group: leg, role: SphereRole::Link });
        spheres.push(CollisionSphere { body: Some(j0 + 2), center: Vector3::zeros(), radius: r_shank, group: leg, role: SphereRole::Distal });
        spheres.push(CollisionSphere { body: Some(j0 + 2), center: foot * 0.5, radius: r_shank, group: leg, role: SphereRole::Distal });
        spheres.push(CollisionSphere { body: Some(j0 + 2), center: foot, radius: FOOT_RADIUS, group: leg, role: SphereRole::Foot });
        feet.push(FootPoint { body: j0 + 2, offset: foot, friction: params.friction[leg] });
    }
    let half = Vector3::new(hx, hy, 0.25 * hx + 0.02);
    let multibody = Multibody {
        base_inertia: RigidInertia::new(params.base_mass, Vector3::zeros(), box_inertia(params.base_mass, &half)),
        bodies,
        feet,
        spheres,
        base_half_extents: half,
        fixed_base: false,
    };
    let nominal = params.nominal_joint_config();
    let r_n = nominal_height(&multibody, &nominal);
    if !(r_n > MIN_SEGMENT) {
        return Err(MorphologyError::Degenerate(format!("feet do not reach below the base (r_n = {r_n})")));
    }
    Ok(RobotModel { ref_id: reference.id, params: params.clone(), multibody, nominal, r_n })
}

/// Depth of the lowest foot below a level base at configuration `q`.
pub fn nominal_height(model: &Multibody, q: &[f64]) -> f64 {
    let kin = model.kinematics(&Vector3::zeros(), &UnitQuaternion::identity(), q);
    model
        .feet
        .iter()
        .map(|f| -kin.point_world(Some(f.body), &f.offset).z)
        .fold(f64::NEG_INFINITY, f64::max)
}

impl RobotModel {
    pub fn gains(&self) -> ActuatorGains {
        ActuatorGains { kp: self.params.kp, kd: self.params.kd, tau_max: self.params.tau_max }
    }

    /// Actuation with the latency line primed with `q^n` at `t0`.
    pub fn actuation(&self, t0: f64) -> Actuation {
        Actuation {
            gains: self.gains(),
            mode: self.params.actuator,
            latency: LatencyBuffer::new(self.params.latency, self.nominal.clone(), t0),
        }
    }

    /// Level base at `r_n + clearance`, joints at `q`, at rest.
    pub fn standing_state(&self, clearance: f64, q: Vec<f64>) -> SimState {
        SimState::at_rest(Vector3::new(0.0, 0.0, self.r_n + clearance), q)
    }

    pub fn total_mass(&self) -> f64 {
        self.multibody.total_mass()
    }
}
