//! Articulated-body algorithm for a floating or fixed base.

use nalgebra::{DVector, Matrix6, Vector6};

use super::multibody::{joint_motion, joint_subspace, parent_slot, Kinematics, Multibody};
use super::spatial::{cross_force, cross_motion, Force, Motion};
use super::SimulationError;

/// Generalized acceleration in the internal ordering
/// `[base angular (body), base linear (body), joints]`.
///
/// `external` holds one body-coordinate spatial force per body with the base
/// at index 0; gravity must already be included there.
pub fn articulated_body_accel(
    model: &Multibody,
    kin: &Kinematics,
    base_twist: &Motion,
    qd: &[f64],
    tau: &[f64],
    external: &[Force],
) -> Result<DVector<f64>, SimulationError> {
    let n = model.bodies.len();
    let base_twist = if model.fixed_base { Motion::zeros() } else { *base_twist };
    let velocities = model.body_velocities(kin, &base_twist, qd);

    let mut ia: Vec<Matrix6<f64>> = Vec::with_capacity(n + 1);
    let mut pa: Vec<Vector6<f64>> = Vec::with_capacity(n + 1);
    let mut bias: Vec<Motion> = Vec::with_capacity(n);

    let i0 = model.base_inertia.matrix();
    ia.push(i0);
    pa.push(cross_force(&velocities[0], &(i0 * velocities[0])) - external[0]);
    for (i, body) in model.bodies.iter().enumerate() {
        let v = velocities[i + 1];
        let inertia = body.inertia.matrix();
        bias.push(cross_motion(&v, &joint_motion(body, qd[i])));
        ia.push(inertia);
        pa.push(cross_force(&v, &(inertia * v)) - external[i + 1]);
    }

    let mut u_vec = vec![Vector6::zeros(); n];
    let mut d = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in (0..n).rev() {
        let body = &model.bodies[i];
        let s = joint_subspace(body);
        let slot = i + 1;
        let ui = ia[slot] * s;
        let di = s.dot(&ui) + body.armature;
        if !(di > 0.0) {
            return Err(SimulationError::Singular(format!("joint {i} has no articulated inertia")));
        }
        let uu = tau[i] - s.dot(&pa[slot]);
        let i_art = ia[slot] - ui * ui.transpose() / di;
        let p_art = pa[slot] + i_art * bias[i] + ui * (uu / di);
        let x = &model.bodies[i];
        let ps = parent_slot(x.parent);
        let xup = &kin.xup[i];
        let contrib = xup.inertia_to_parent(&i_art);
        ia[ps] += contrib;
        pa[ps] += xup.inv_apply_force(&p_art);
        u_vec[i] = ui;
        d[i] = di;
        u[i] = uu;
    }

    let nb = model.base_dofs();
    let mut out = DVector::zeros(nb + n);
    let mut acc: Vec<Motion> = Vec::with_capacity(n + 1);
    if model.fixed_base {
        acc.push(Motion::zeros());
    } else {
        let chol = ia[0]
            .cholesky()
            .ok_or_else(|| SimulationError::Singular("base articulated inertia".into()))?;
        let a0 = -chol.solve(&pa[0]);
        out.rows_mut(0, 6).copy_from(&a0);
        acc.push(a0);
    }
    for i in 0..n {
        let body = &model.bodies[i];
        let s = joint_subspace(body);
        let ap = acc[parent_slot(body.parent)];
        let a = kin.xup[i].apply_motion(&ap) + bias[i];
        let qdd = (u[i] - u_vec[i].dot(&a)) / d[i];
        out[nb + i] = qdd;
        acc.push(a + s * qdd);
    }
    Ok(out)
}
