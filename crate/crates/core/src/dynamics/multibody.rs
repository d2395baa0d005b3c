//! Kinematic tree description shared by the simulator and the morphology
//! generator: a (floating or fixed) base followed by revolute bodies in
//! topological order, point feet and coarse collision spheres.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::spatial::{axis_angle, stack, Force, Motion, RigidInertia, Transform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub name: String,
    /// Parent body index, `None` for the base.
    pub parent: Option<usize>,
    /// Joint axis (unit) in this body's frame. The joint sits at the body origin.
    pub axis: Vector3<f64>,
    /// Joint position in the parent frame at zero joint angle.
    pub offset: Vector3<f64>,
    pub inertia: RigidInertia,
    /// Reflected rotor inertia added to the joint diagonal.
    pub armature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootPoint {
    pub body: usize,
    /// Contact point in the body frame.
    pub offset: Vector3<f64>,
    pub friction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SphereRole {
    /// Proximal leg geometry, checked against the ground and other legs.
    Link,
    /// Knee and shank geometry: like `Link`, and also tested against the base box.
    Distal,
    /// Foot sphere: excluded from ground collision, included in self-collision.
    Foot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionSphere {
    /// Body index, `None` for the base.
    pub body: Option<usize>,
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Spheres sharing a group (a leg) are never tested against each other.
    pub group: usize,
    pub role: SphereRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multibody {
    pub base_inertia: RigidInertia,
    pub bodies: Vec<Body>,
    pub feet: Vec<FootPoint>,
    pub spheres: Vec<CollisionSphere>,
    /// Half extents of the base collision box, centred on the base origin.
    pub base_half_extents: Vector3<f64>,
    pub fixed_base: bool,
}

/// Pose-dependent quantities for one configuration.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub base_rot: Matrix3<f64>,
    pub base_pos: Vector3<f64>,
    /// Parent-to-child spatial transforms.
    pub xup: Vec<Transform>,
    /// Body-to-world rotations.
    pub rot: Vec<Matrix3<f64>>,
    /// Body origins in world coordinates.
    pub pos: Vec<Vector3<f64>>,
}

impl Kinematics {
    pub fn body_rot(&self, body: Option<usize>) -> &Matrix3<f64> {
        match body {
            Some(i) => &self.rot[i],
            None => &self.base_rot,
        }
    }

    pub fn body_pos(&self, body: Option<usize>) -> &Vector3<f64> {
        match body {
            Some(i) => &self.pos[i],
            None => &self.base_pos,
        }
    }

    /// World position of a point given in a body frame.
    pub fn point_world(&self, body: Option<usize>, local: &Vector3<f64>) -> Vector3<f64> {
        self.body_pos(body) + self.body_rot(body) * local
    }

    /// Spatial force in body coordinates for a world force applied at a world point.
    pub fn world_force_on_body(
        &self,
        body: Option<usize>,
        point: &Vector3<f64>,
        force: &Vector3<f64>,
    ) -> Force {
        let r = self.body_rot(body).transpose();
        let f = r * force;
        let arm = r * (point - self.body_pos(body));
        stack(&arm.cross(&f), &f)
    }
}

impl Multibody {
    pub fn dof(&self) -> usize {
        self.bodies.len()
    }

    /// Size of the generalized velocity.
    pub fn nv(&self) -> usize {
        self.base_dofs() + self.bodies.len()
    }

    pub fn base_dofs(&self) -> usize {
        if self.fixed_base {
            0
        } else {
            6
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.base_inertia.mass + self.bodies.iter().map(|b| b.inertia.mass).sum::<f64>()
    }

    pub fn kinematics(&self, base_pos: &Vector3<f64>, base_quat: &UnitQuaternion<f64>, q: &[f64]) -> Kinematics {
        let n = self.bodies.len();
        let base_rot = *base_quat.to_rotation_matrix().matrix();
        let mut xup = Vec::with_capacity(n);
        let mut rot = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n);
        for (i, body) in self.bodies.iter().enumerate() {
            let joint_rot = axis_angle(&body.axis, q[i]);
            // E maps parent coordinates to child coordinates.
            xup.push(Transform { rot: joint_rot.transpose(), trans: body.offset });
            let (prot, ppos): (Matrix3<f64>, Vector3<f64>) = match body.parent {
                Some(p) => (rot[p], pos[p]),
                None => (base_rot, *base_pos),
            };
            pos.push(ppos + prot * body.offset);
            rot.push(prot * joint_rot);
        }
        Kinematics { base_rot, base_pos: *base_pos, xup, rot, pos }
    }

    /// Body-coordinate spatial velocities; index 0 is the base.
    pub fn body_velocities(&self, kin: &Kinematics, base_twist: &Motion, qd: &[f64]) -> Vec<Motion> {
        let mut v = Vec::with_capacity(self.bodies.len() + 1);
        v.push(*base_twist);
        for (i, body) in self.bodies.iter().enumerate() {
            let vp = v[parent_slot(body.parent)];
            v.push(kin.xup[i].apply_motion(&vp) + joint_motion(body, qd[i]));
        }
        v
    }

    /// World linear velocity of a body-fixed point.
    pub fn point_velocity(
        &self,
        kin: &Kinematics,
        velocities: &[Motion],
        body: Option<usize>,
        local: &Vector3<f64>,
    ) -> Vector3<f64> {
        let slot = parent_slot(body);
        let v = velocities[slot];
        let w = Vector3::new(v[0], v[1], v[2]);
        let lin = Vector3::new(v[3], v[4], v[5]);
        kin.body_rot(body) * (lin + w.cross(local))
    }

    /// Indices of the bodies on the path from the base to `body`, root first.
    pub fn ancestors(&self, body: usize) -> Vec<usize> {
        let mut chain = vec![body];
        let mut cur = self.bodies[body].parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = self.bodies[p].parent;
        }
        chain.reverse();
        chain
    }

    /// World-frame centre of mass of every body, base first.
    pub fn coms_world(&self, kin: &Kinematics) -> Vec<(f64, Vector3<f64>)> {
        let mut out = Vec::with_capacity(self.bodies.len() + 1);
        out.push((self.base_inertia.mass, kin.point_world(None, &self.base_inertia.com)));
        for (i, b) in self.bodies.iter().enumerate() {
            out.push((b.inertia.mass, kin.point_world(Some(i), &b.inertia.com)));
        }
        out
    }
}

/// Slot of a body in arrays where the base occupies index 0.
#[inline]
pub fn parent_slot(parent: Option<usize>) -> usize {
    match parent {
        Some(p) => p + 1,
        None => 0,
    }
}

#[inline]
pub fn joint_subspace(body: &Body) -> Motion {
    stack(&body.axis, &Vector3::zeros())
}

#[inline]
pub fn joint_motion(body: &Body, qd: f64) -> Motion {
    joint_subspace(body) * qd
}
