//! 6D spatial vector algebra in the Plücker convention.
//!
//! Motion vectors are stored as `[angular; linear]`, force vectors as
//! `[moment; force]`. A [`Transform`] from frame A to frame B holds the
//! rotation `E` taking A-coordinates to B-coordinates and the position `r`
//! of B's origin expressed in A.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

pub type Motion = Vector6<f64>;
pub type Force = Vector6<f64>;

#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[inline]
pub fn angular(m: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(m[0], m[1], m[2])
}

#[inline]
pub fn linear(m: &Vector6<f64>) -> Vector3<f64> {
    Vector3::new(m[3], m[4], m[5])
}

#[inline]
pub fn stack(top: &Vector3<f64>, bottom: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

/// Motion cross product `v ×m m`.
pub fn cross_motion(v: &Motion, m: &Motion) -> Motion {
    let (w, v0) = (angular(v), linear(v));
    let (mw, mv) = (angular(m), linear(m));
    stack(&w.cross(&mw), &(w.cross(&mv) + v0.cross(&mw)))
}

/// Force cross product `v ×* f`.
pub fn cross_force(v: &Motion, f: &Force) -> Force {
    let (w, v0) = (angular(v), linear(v));
    let (n, f0) = (angular(f), linear(f));
    stack(&(w.cross(&n) + v0.cross(&f0)), &w.cross(&f0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rot: Matrix3<f64>,
    pub trans: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self { rot: Matrix3::identity(), trans: Vector3::zeros() }
    }

    pub fn translation(r: Vector3<f64>) -> Self {
        Self { rot: Matrix3::identity(), trans: r }
    }

    pub fn rotation(rot: Matrix3<f64>) -> Self {
        Self { rot, trans: Vector3::zeros() }
    }

    /// `self ∘ other`: first `other` (A→B), then `self` (B→C).
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rot: self.rot * other.rot,
            trans: other.trans + other.rot.transpose() * self.trans,
        }
    }

    pub fn apply_motion(&self, m: &Motion) -> Motion {
        let w = angular(m);
        let v = linear(m);
        stack(&(self.rot * w), &(self.rot * (v - self.trans.cross(&w))))
    }

    /// Maps a motion vector from B back to A.
    pub fn inv_apply_motion(&self, m: &Motion) -> Motion {
        let et = self.rot.transpose();
        let w = et * angular(m);
        let v = et * linear(m) + self.trans.cross(&w);
        stack(&w, &v)
    }

    pub fn apply_force(&self, f: &Force) -> Force {
        let n = angular(f);
        let f0 = linear(f);
        stack(&(self.rot * (n - self.trans.cross(&f0))), &(self.rot * f0))
    }

    /// Maps a force vector from B back to A (the transpose of the motion map).
    pub fn inv_apply_force(&self, f: &Force) -> Force {
        let et = self.rot.transpose();
        let f0 = et * linear(f);
        let n = et * angular(f) + self.trans.cross(&f0);
        stack(&n, &f0)
    }

    pub fn motion_matrix(&self) -> Matrix6<f64> {
        let mut x = Matrix6::zeros();
        let e = self.rot;
        let erx = -e * skew(&self.trans);
        x.fixed_view_mut::<3, 3>(0, 0).copy_from(&e);
        x.fixed_view_mut::<3, 3>(3, 3).copy_from(&e);
        x.fixed_view_mut::<3, 3>(3, 0).copy_from(&erx);
        x
    }

    /// `Xᵀ I X` for a 6×6 inertia expressed in B, yielding the inertia in A.
    pub fn inertia_to_parent(&self, inertia: &Matrix6<f64>) -> Matrix6<f64> {
        let x = self.motion_matrix();
        x.transpose() * inertia * x
    }
}

/// Rigid-body inertia about a body frame.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RigidInertia {
    pub mass: f64,
    /// Centre of mass in the body frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the centre of mass, body axes.
    pub inertia_com: Matrix3<f64>,
}

impl RigidInertia {
    pub fn new(mass: f64, com: Vector3<f64>, inertia_com: Matrix3<f64>) -> Self {
        Self { mass, com, inertia_com }
    }

    pub fn point_mass(mass: f64, com: Vector3<f64>) -> Self {
        Self { mass, com, inertia_com: Matrix3::zeros() }
    }

    pub fn zero() -> Self {
        Self::point_mass(0.0, Vector3::zeros())
    }

    pub fn matrix(&self) -> Matrix6<f64> {
        let cx = skew(&self.com);
        let m = self.mass;
        let mut i = Matrix6::zeros();
        i.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.inertia_com + m * cx * cx.transpose()));
        i.fixed_view_mut::<3, 3>(0, 3).copy_from(&(m * cx));
        i.fixed_view_mut::<3, 3>(3, 0).copy_from(&(m * cx.transpose()));
        i.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * m));
        i
    }

    pub fn apply(&self, v: &Motion) -> Force {
        self.matrix() * v
    }
}

/// Rotation matrix for a right-handed rotation of `angle` about unit `axis`.
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let k = skew(axis);
    Matrix3::identity() + s * k + (1.0 - c) * k * k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_transform() -> Transform {
        Transform {
            rot: axis_angle(&Vector3::new(0.3, -0.4, 0.866).normalize(), 0.7),
            trans: Vector3::new(0.1, -0.2, 0.35),
        }
    }

    #[test]
    fn matrix_form_matches_vector_form() {
        let x = sample_transform();
        let m = Motion::new(0.1, 0.2, -0.3, 1.0, -2.0, 0.5);
        let a = x.apply_motion(&m);
        let b = x.motion_matrix() * m;
        assert!((a - b).norm() < 1e-14);
        let f = Force::new(0.4, -0.1, 0.2, 3.0, 1.0, -1.0);
        let xf = x.motion_matrix().try_inverse().unwrap().transpose();
        assert!((x.apply_force(&f) - xf * f).norm() < 1e-12);
    }

    #[test]
    fn inverse_maps_round_trip() {
        let x = sample_transform();
        let m = Motion::new(0.1, 0.2, -0.3, 1.0, -2.0, 0.5);
        assert!((x.inv_apply_motion(&x.apply_motion(&m)) - m).norm() < 1e-14);
        assert!((x.inv_apply_force(&x.apply_force(&m)) - m).norm() < 1e-14);
    }

    #[test]
    fn power_is_frame_invariant() {
        let x = sample_transform();
        let m = Motion::new(0.1, 0.2, -0.3, 1.0, -2.0, 0.5);
        let f = Force::new(0.4, -0.1, 0.2, 3.0, 1.0, -1.0);
        let p_a = m.dot(&f);
        let p_b = x.apply_motion(&m).dot(&x.apply_force(&f));
        assert!((p_a - p_b).abs() < 1e-13);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let a = sample_transform();
        let b = Transform {
            rot: axis_angle(&Vector3::x(), -0.4),
            trans: Vector3::new(0.0, 0.3, -0.1),
        };
        let m = Motion::new(0.5, -0.2, 0.1, 0.3, 0.7, -1.1);
        let seq = b.apply_motion(&a.apply_motion(&m));
        let comp = b.compose(&a).apply_motion(&m);
        assert!((seq - comp).norm() < 1e-14);
    }
}
