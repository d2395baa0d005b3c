//! Penalty ground contact with regularized Coulomb friction, and the
//! collision tests that end an episode.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::multibody::{Kinematics, Multibody, SphereRole};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    /// Normal stiffness (N/m).
    pub stiffness: f64,
    /// Normal damping (N·s/m).
    pub damping: f64,
    /// Tangential stiffness of the stick spring anchored at touchdown (N/m).
    pub tangential_stiffness: f64,
    /// Tangential damping below saturation (N·s/m).
    pub tangential_damping: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { stiffness: 1e5, damping: 1e3, tangential_stiffness: 2e4, tangential_damping: 5e2 }
    }
}

/// `F_n = max(0, k·δ − d·v_z)` for a penetrating point, zero otherwise.
pub fn normal_force(p: &ContactParams, penetration: f64, vz: f64) -> f64 {
    if penetration <= 0.0 {
        return 0.0;
    }
    (p.stiffness * penetration - p.damping * vz).max(0.0)
}

/// Projects a tangential force demand onto the friction disc of radius `μ·F_n`.
pub fn clamp_to_cone(demand: &Vector2<f64>, mu: f64, fn_: f64) -> Vector2<f64> {
    let limit = mu * fn_.max(0.0);
    let norm = demand.norm();
    if norm <= limit {
        *demand
    } else if norm > 0.0 {
        demand * (limit / norm)
    } else {
        Vector2::zeros()
    }
}

/// Stick-spring friction: `−k_t·(p − anchor) − c_t·v`, projected onto the cone.
pub fn friction_force(
    p: &ContactParams,
    stretch: &Vector2<f64>,
    v_t: &Vector2<f64>,
    mu: f64,
    fn_: f64,
) -> Vector2<f64> {
    clamp_to_cone(&(-p.tangential_stiffness * stretch - p.tangential_damping * v_t), mu, fn_)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FootContact {
    pub in_contact: bool,
    pub normal_force: f64,
    /// Tangential friction force in world x/y (N).
    pub tangential_force: [f64; 2],
    /// Tangential foot velocity in world x/y (m/s).
    pub slip_velocity: [f64; 2],
    pub penetration: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactInfo {
    pub feet: Vec<FootContact>,
    /// True when any non-foot geometry touches the ground.
    pub body_ground_contact: bool,
}

impl ContactInfo {
    pub fn contact_flags(&self) -> Vec<bool> {
        self.feet.iter().map(|f| f.in_contact).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionEvents {
    pub ground: bool,
    pub self_collision: bool,
}

impl CollisionEvents {
    pub fn any(&self) -> bool {
        self.ground || self.self_collision
    }
}

/// Ground contact of any non-foot geometry, and sphere-level self-collision.
pub fn collision_query(model: &Multibody, kin: &Kinematics) -> CollisionEvents {
    CollisionEvents {
        ground: body_touches_ground(model, kin),
        self_collision: self_collision(model, kin),
    }
}

pub fn body_touches_ground(model: &Multibody, kin: &Kinematics) -> bool {
    let h = model.base_half_extents;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let corner = Vector3::new(sx * h.x, sy * h.y, sz * h.z);
                if kin.point_world(None, &corner).z <= 0.0 {
                    return true;
                }
            }
        }
    }
    model.spheres.iter().any(|s| {
        s.role != SphereRole::Foot && kin.point_world(s.body, &s.center).z <= s.radius
    })
}

pub fn self_collision(model: &Multibody, kin: &Kinematics) -> bool {
    let centres: Vec<Vector3<f64>> =
        model.spheres.iter().map(|s| kin.point_world(s.body, &s.center)).collect();
    let h = model.base_half_extents;
    for (i, a) in model.spheres.iter().enumerate() {
        if a.role != SphereRole::Link {
            let local = kin.base_rot.transpose() * (centres[i] - kin.base_pos);
            let nearest = Vector3::new(
                local.x.clamp(-h.x, h.x),
                local.y.clamp(-h.y, h.y),
                local.z.clamp(-h.z, h.z),
            );
            if (local - nearest).norm() < a.radius {
                return true;
            }
        }
        for (j, b) in model.spheres.iter().enumerate().skip(i + 1) {
            if a.group == b.group {
                continue;
            }
            if (centres[i] - centres[j]).norm() < a.radius + b.radius {
                return true;
            }
        }
    }
    false
}
