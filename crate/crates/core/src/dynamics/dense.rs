//! Joint-space quantities: composite-rigid-body mass matrix, recursive
//! Newton-Euler bias forces and point Jacobians. The implicit integrator
//! assembles its linear system from these.

use nalgebra::{DMatrix, DVector, Matrix3xX, Matrix6, Vector3};

use super::multibody::{joint_motion, joint_subspace, parent_slot, Kinematics, Multibody};
use super::spatial::{cross_force, cross_motion, skew, stack, Force, Motion};

/// Joint-space inertia in the internal velocity ordering, armature included.
pub fn mass_matrix(model: &Multibody, kin: &Kinematics) -> DMatrix<f64> {
    let n = model.bodies.len();
    let nb = model.base_dofs();
    let mut composite: Vec<Matrix6<f64>> = Vec::with_capacity(n + 1);
    composite.push(model.base_inertia.matrix());
    for b in &model.bodies {
        composite.push(b.inertia.matrix());
    }
    for i in (0..n).rev() {
        let ps = parent_slot(model.bodies[i].parent);
        let c = kin.xup[i].inertia_to_parent(&composite[i + 1]);
        composite[ps] += c;
    }

    let mut h = DMatrix::zeros(nb + n, nb + n);
    if nb == 6 {
        h.view_mut((0, 0), (6, 6)).copy_from(&composite[0]);
    }
    for i in 0..n {
        let body = &model.bodies[i];
        let s = joint_subspace(body);
        let mut f: Force = composite[i + 1] * s;
        h[(nb + i, nb + i)] = s.dot(&f) + body.armature;
        let mut j = i;
        loop {
            f = kin.xup[j].inv_apply_force(&f);
            match model.bodies[j].parent {
                Some(p) => {
                    let sp = joint_subspace(&model.bodies[p]);
                    let val = f.dot(&sp);
                    h[(nb + i, nb + p)] = val;
                    h[(nb + p, nb + i)] = val;
                    j = p;
                }
                None => {
                    if nb == 6 {
                        for k in 0..6 {
                            h[(k, nb + i)] = f[k];
                            h[(nb + i, k)] = f[k];
                        }
                    }
                    break;
                }
            }
        }
    }
    h
}

/// Coriolis, centrifugal and gravity forces `C(q, ν)ν + g(q)`.
pub fn bias_forces(
    model: &Multibody,
    kin: &Kinematics,
    base_twist: &Motion,
    qd: &[f64],
    gravity_world: &Vector3<f64>,
) -> DVector<f64> {
    let n = model.bodies.len();
    let nb = model.base_dofs();
    let base_twist = if model.fixed_base { Motion::zeros() } else { *base_twist };
    // Gravity enters as a fictitious upward acceleration of the base.
    let g_base = kin.base_rot.transpose() * gravity_world;
    let a0 = stack(&Vector3::zeros(), &(-g_base));

    let mut v: Vec<Motion> = Vec::with_capacity(n + 1);
    let mut a: Vec<Motion> = Vec::with_capacity(n + 1);
    let mut f: Vec<Force> = Vec::with_capacity(n + 1);
    let i0 = model.base_inertia.matrix();
    v.push(base_twist);
    a.push(a0);
    f.push(i0 * a0 + cross_force(&base_twist, &(i0 * base_twist)));
    for (i, body) in model.bodies.iter().enumerate() {
        let ps = parent_slot(body.parent);
        let vj = joint_motion(body, qd[i]);
        let vi = kin.xup[i].apply_motion(&v[ps]) + vj;
        let ai = kin.xup[i].apply_motion(&a[ps]) + cross_motion(&vi, &vj);
        let inertia = body.inertia.matrix();
        f.push(inertia * ai + cross_force(&vi, &(inertia * vi)));
        v.push(vi);
        a.push(ai);
    }
    let mut out = DVector::zeros(nb + n);
    for i in (0..n).rev() {
        let body = &model.bodies[i];
        out[nb + i] = joint_subspace(body).dot(&f[i + 1]);
        let ps = parent_slot(body.parent);
        let fp = kin.xup[i].inv_apply_force(&f[i + 1]);
        f[ps] += fp;
    }
    if nb == 6 {
        out.rows_mut(0, 6).copy_from(&f[0]);
    }
    out
}

/// Generalized force produced by body-coordinate spatial forces (base at index 0).
pub fn generalized_external(model: &Multibody, kin: &Kinematics, external: &[Force]) -> DVector<f64> {
    let n = model.bodies.len();
    let nb = model.base_dofs();
    let mut acc = external.to_vec();
    let mut out = DVector::zeros(nb + n);
    for i in (0..n).rev() {
        let body = &model.bodies[i];
        out[nb + i] = joint_subspace(body).dot(&acc[i + 1]);
        let ps = parent_slot(body.parent);
        let fp = kin.xup[i].inv_apply_force(&acc[i + 1]);
        acc[ps] += fp;
    }
    if nb == 6 {
        out.rows_mut(0, 6).copy_from(&acc[0]);
    }
    out
}

/// Jacobian of the world linear velocity of a body-fixed point.
pub fn point_jacobian(
    model: &Multibody,
    kin: &Kinematics,
    body: Option<usize>,
    point_world: &Vector3<f64>,
) -> Matrix3xX<f64> {
    let nb = model.base_dofs();
    let mut j = Matrix3xX::zeros(model.nv());
    if nb == 6 {
        let r_body = kin.base_rot.transpose() * (point_world - kin.base_pos);
        let jw = -kin.base_rot * skew(&r_body);
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&jw);
        j.fixed_view_mut::<3, 3>(0, 3).copy_from(&kin.base_rot);
    }
    if let Some(b) = body {
        for k in model.ancestors(b) {
            let axis = kin.rot[k] * model.bodies[k].axis;
            let col = axis.cross(&(point_world - kin.pos[k]));
            j.fixed_view_mut::<3, 1>(0, nb + k).copy_from(&col);
        }
    }
    j
}

/// Kinetic energy `½ νᵀ M ν` computed body by body (armature included).
pub fn kinetic_energy(model: &Multibody, kin: &Kinematics, base_twist: &Motion, qd: &[f64]) -> f64 {
    let base_twist = if model.fixed_base { Motion::zeros() } else { *base_twist };
    let v = model.body_velocities(kin, &base_twist, qd);
    let mut e = 0.5 * v[0].dot(&model.base_inertia.apply(&v[0]));
    for (i, body) in model.bodies.iter().enumerate() {
        e += 0.5 * v[i + 1].dot(&body.inertia.apply(&v[i + 1]));
        e += 0.5 * body.armature * qd[i] * qd[i];
    }
    e
}

/// Gravitational potential energy relative to z = 0.
pub fn potential_energy(model: &Multibody, kin: &Kinematics, gravity: f64) -> f64 {
    model.coms_world(kin).iter().map(|(m, c)| m * gravity * c.z).sum()
}
