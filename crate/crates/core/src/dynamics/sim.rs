//! Time stepping for a single robot on flat ground.
//!
//! Each substep is a kick-drift-kick scheme. Gravity, velocity-product terms
//! and scheduled pushes are integrated with two half kicks, which makes
//! ballistic motion exact. Contact and joint PD forces are stiff at
//! millisecond steps, so they are first solved implicitly (linearized in the
//! end-of-step velocity), then re-evaluated with their clamps (friction cone,
//! unilateral normal force, torque limit) and applied as one explicit impulse.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::aba::articulated_body_accel;
use super::actuation::{ActuatorGains, ActuatorMode, Derating, LatencyBuffer};
use super::contact::{collision_query, friction_force, CollisionEvents, ContactInfo, ContactParams, FootContact};
use super::dense::{bias_forces, kinetic_energy, mass_matrix, point_jacobian, potential_energy};
use super::multibody::{Kinematics, Multibody};
use super::spatial::{stack, Force, Motion};
use super::SimulationError;

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt_sim: f64,
    /// Gravitational acceleration magnitude along world −z.
    pub gravity: f64,
    pub contact: ContactParams,
    pub derating: Derating,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_sim: 1e-3,
            gravity: GRAVITY,
            contact: ContactParams::default(),
            derating: Derating::default(),
        }
    }
}

/// Public state. Base velocities are world-frame; `base_lin_vel` is the
/// velocity of the base frame origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub base_pos: Vector3<f64>,
    pub base_quat: UnitQuaternion<f64>,
    pub q: Vec<f64>,
    pub base_lin_vel: Vector3<f64>,
    pub base_ang_vel: Vector3<f64>,
    pub qd: Vec<f64>,
    pub t: f64,
    /// Ground anchor (world x, y) of each foot's stick spring while in contact.
    #[serde(default)]
    pub anchors: Vec<Option<[f64; 2]>>,
}

impl SimState {
    pub fn at_rest(base_pos: Vector3<f64>, q: Vec<f64>) -> Self {
        let n = q.len();
        Self {
            base_pos,
            base_quat: UnitQuaternion::identity(),
            q,
            base_lin_vel: Vector3::zeros(),
            base_ang_vel: Vector3::zeros(),
            qd: vec![0.0; n],
            t: 0.0,
            anchors: Vec::new(),
        }
    }

    pub fn rotation(&self) -> nalgebra::Matrix3<f64> {
        *self.base_quat.to_rotation_matrix().matrix()
    }

    /// Base twist `[ω; v]` in base coordinates.
    pub fn body_twist(&self) -> Motion {
        let rt = self.rotation().transpose();
        stack(&(rt * self.base_ang_vel), &(rt * self.base_lin_vel))
    }

    pub fn is_finite(&self) -> bool {
        self.base_pos.iter().all(|x| x.is_finite())
            && self.base_quat.coords.iter().all(|x| x.is_finite())
            && self.base_lin_vel.iter().all(|x| x.is_finite())
            && self.base_ang_vel.iter().all(|x| x.is_finite())
            && self.q.iter().all(|x| x.is_finite())
            && self.qd.iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Push {
    pub start: f64,
    pub end: f64,
    /// World-frame force on the base origin (N).
    pub force: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    pub gains: ActuatorGains,
    pub mode: ActuatorMode,
    pub latency: LatencyBuffer,
}

/// Generalized acceleration under joint torques `tau` and base-frame forces
/// `external` (base first), gravity added internally. Ordering is
/// `[base angular, base linear, joints]` with base terms in base coordinates.
pub fn forward_dynamics(
    model: &Multibody,
    state: &SimState,
    tau: &[f64],
    external: &[Force],
    gravity: f64,
) -> Result<DVector<f64>, SimulationError> {
    let kin = model.kinematics(&state.base_pos, &state.base_quat, &state.q);
    let mut ext: Vec<Force> = if external.is_empty() {
        vec![Force::zeros(); model.bodies.len() + 1]
    } else {
        external.to_vec()
    };
    let g = Vector3::new(0.0, 0.0, -gravity);
    for (slot, (mass, com)) in model.coms_world(&kin).into_iter().enumerate() {
        let body = if slot == 0 { None } else { Some(slot - 1) };
        ext[slot] += kin.world_force_on_body(body, &com, &(g * mass));
    }
    articulated_body_accel(model, &kin, &state.body_twist(), &state.qd, tau, &ext)
}

struct PoseCache {
    kin: Kinematics,
    mass: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub torques: Vec<f64>,
    pub contacts: ContactInfo,
    pub collisions: CollisionEvents,
}

/// Everything needed to continue a run bit-for-bit on the same model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSnapshot {
    pub state: SimState,
    pub pushes: Vec<Push>,
    pub actuation: Option<Actuation>,
    pub friction: Vec<f64>,
    pub last: StepOutput,
}

pub struct Simulator {
    pub model: Multibody,
    pub config: SimConfig,
    /// `None` leaves the joints passive.
    pub actuation: Option<Actuation>,
    pub friction: Vec<f64>,
    state: SimState,
    pushes: Vec<Push>,
    cache: Option<PoseCache>,
    last: StepOutput,
}

impl Simulator {
    pub fn new(model: Multibody, config: SimConfig, actuation: Option<Actuation>, state: SimState) -> Self {
        let friction = model.feet.iter().map(|f| f.friction).collect();
        let n = model.dof();
        let mut sim = Self {
            model,
            config,
            actuation,
            friction,
            state,
            pushes: Vec::new(),
            cache: None,
            last: StepOutput { torques: vec![0.0; n], ..Default::default() },
        };
        sim.last.contacts = sim.contact_snapshot();
        sim.last.collisions = sim.collisions();
        sim
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn set_state(&mut self, state: SimState) {
        self.state = state;
        self.cache = None;
        self.last.contacts = self.contact_snapshot();
        self.last.collisions = self.collisions();
    }

    pub fn snapshot(&self) -> SimSnapshot {
        SimSnapshot {
            state: self.state.clone(),
            pushes: self.pushes.clone(),
            actuation: self.actuation.clone(),
            friction: self.friction.clone(),
            last: self.last.clone(),
        }
    }

    /// Restores a snapshot taken on the same model. The pose cache is a pure
    /// function of the state and is rebuilt on the next substep.
    pub fn restore(&mut self, snap: SimSnapshot) {
        self.state = snap.state;
        self.pushes = snap.pushes;
        self.actuation = snap.actuation;
        self.friction = snap.friction;
        self.last = snap.last;
        self.cache = None;
    }

    pub fn last(&self) -> &StepOutput {
        &self.last
    }

    pub fn kinematics(&self) -> Kinematics {
        self.model.kinematics(&self.state.base_pos, &self.state.base_quat, &self.state.q)
    }

    pub fn collisions(&self) -> CollisionEvents {
        collision_query(&self.model, &self.kinematics())
    }

    /// Schedules a world-frame force on the base for `[now, now + duration)`.
    /// Scheduling the same window twice replaces rather than stacks it.
    pub fn apply_external_push(&mut self, force: Vector3<f64>, duration: f64) {
        let start = self.state.t;
        self.schedule_push(Push { start, end: start + duration, force: [force.x, force.y, force.z] });
    }

    pub fn schedule_push(&mut self, push: Push) {
        if push.end <= push.start {
            return;
        }
        self.pushes.retain(|p| !(p.start == push.start && p.end == push.end));
        self.pushes.push(push);
    }

    pub fn pushes(&self) -> &[Push] {
        &self.pushes
    }

    fn push_force(&self, t: f64) -> Vector3<f64> {
        let eps = 1e-9;
        self.pushes
            .iter()
            .filter(|p| t + eps >= p.start && t + eps < p.end)
            .fold(Vector3::zeros(), |acc, p| acc + Vector3::from(p.force))
    }

    /// Kinetic plus gravitational potential energy.
    pub fn energy(&self) -> f64 {
        let kin = self.kinematics();
        kinetic_energy(&self.model, &kin, &self.state.body_twist(), &self.state.qd)
            + potential_energy(&self.model, &kin, self.config.gravity)
    }

    /// Advances one control period. `q_des` enters the latency line at the
    /// current time; each substep tracks whatever target the line releases.
    pub fn step(&mut self, q_des: &[f64], dt: f64) -> Result<&StepOutput, SimulationError> {
        let h = self.config.dt_sim;
        let substeps = (dt / h).round().max(1.0) as usize;
        let t0 = self.state.t;
        if let Some(act) = self.actuation.as_mut() {
            act.latency.push(q_des.to_vec(), t0);
        }
        for k in 0..substeps {
            let t = t0 + k as f64 * h;
            let target = match &self.actuation {
                Some(act) => act.latency.query(t).to_vec(),
                None => Vec::new(),
            };
            self.substep(&target, h)?;
        }
        self.state.t = t0 + substeps as f64 * h;
        if let Some(act) = self.actuation.as_mut() {
            act.latency.prune(self.state.t);
        }
        self.pushes.retain(|p| p.end > self.state.t + 1e-9);
        self.last.collisions = self.collisions();
        self.last.contacts.body_ground_contact = self.last.collisions.ground;
        Ok(&self.last)
    }

    /// Runs the dynamics with no actuation command change (passive or holding).
    pub fn step_passive(&mut self, dt: f64) -> Result<(), SimulationError> {
        let h = self.config.dt_sim;
        let substeps = (dt / h).round().max(1.0) as usize;
        let t0 = self.state.t;
        for k in 0..substeps {
            let t = t0 + k as f64 * h;
            let target = match &self.actuation {
                Some(act) => act.latency.query(t).to_vec(),
                None => Vec::new(),
            };
            self.substep(&target, h)?;
        }
        self.state.t = t0 + substeps as f64 * h;
        Ok(())
    }

    fn pose(&self, state: &SimState) -> Result<PoseCache, SimulationError> {
        let kin = self.model.kinematics(&state.base_pos, &state.base_quat, &state.q);
        let m = mass_matrix(&self.model, &kin);
        let chol = Cholesky::new(m.clone()).ok_or_else(|| SimulationError::Singular("mass matrix".into()))?;
        Ok(PoseCache { kin, mass: m, chol })
    }

    fn non_stiff_force(&self, kin: &Kinematics, nu: &DVector<f64>, t: f64) -> DVector<f64> {
        let nb = self.model.base_dofs();
        let twist = if nb == 6 { Motion::from_iterator(nu.rows(0, 6).iter().copied()) } else { Motion::zeros() };
        let qd: Vec<f64> = nu.rows(nb, self.model.dof()).iter().copied().collect();
        let g = Vector3::new(0.0, 0.0, -self.config.gravity);
        let mut f = -bias_forces(&self.model, kin, &twist, &qd, &g);
        if nb == 6 {
            let push = self.push_force(t);
            if push != Vector3::zeros() {
                let w = kin.world_force_on_body(None, &kin.base_pos, &push);
                for i in 0..6 {
                    f[i] += w[i];
                }
            }
        }
        f
    }

    fn internal_velocity(&self) -> DVector<f64> {
        let nb = self.model.base_dofs();
        let mut nu = DVector::zeros(self.model.nv());
        if nb == 6 {
            nu.rows_mut(0, 6).copy_from(&self.state.body_twist());
        }
        for (i, v) in self.state.qd.iter().enumerate() {
            nu[nb + i] = *v;
        }
        nu
    }

    fn substep(&mut self, target: &[f64], h: f64) -> Result<(), SimulationError> {
        let model = &self.model;
        let nb = model.base_dofs();
        let n = model.dof();
        let nv = model.nv();
        let t = self.state.t;

        let cache = match self.cache.take() {
            Some(c) => c,
            None => self.pose(&self.state)?,
        };
        let kin = &cache.kin;
        let nu0 = self.internal_velocity();
        let f0 = self.non_stiff_force(kin, &nu0, t);
        let nu_half = &nu0 + cache.chol.solve(&f0) * (0.5 * h);

        // Implicit stiff system (M + h·D) ν' = M ν_half + h·f_const.
        let mut lhs = cache.mass.clone();
        let mut rhs = &cache.mass * &nu_half;
        let cp = self.config.contact;
        let c_n = cp.damping + cp.stiffness * h;
        let c_t = cp.tangential_damping + cp.tangential_stiffness * h;
        let mut anchors = self.state.anchors.clone();
        anchors.resize(model.feet.len(), None);

        struct ActiveFoot {
            index: usize,
            depth: f64,
            pos: Vector3<f64>,
            anchor: [f64; 2],
            jac: nalgebra::Matrix3xX<f64>,
        }
        let mut active: Vec<ActiveFoot> = Vec::new();
        let mut feet: Vec<FootContact> = vec![FootContact::default(); model.feet.len()];
        for (i, foot) in model.feet.iter().enumerate() {
            let p = kin.point_world(Some(foot.body), &foot.offset);
            let depth = -p.z;
            feet[i].penetration = depth;
            if depth > 0.0 {
                let anchor = anchors[i].unwrap_or([p.x, p.y]);
                let jac = point_jacobian(model, kin, Some(foot.body), &p);
                let rows = [c_t, c_t, c_n];
                for a in 0..nv {
                    for b in 0..nv {
                        let mut acc = 0.0;
                        for r in 0..3 {
                            acc += jac[(r, a)] * rows[r] * jac[(r, b)];
                        }
                        lhs[(a, b)] += h * acc;
                    }
                }
                let f_const = Vector3::new(
                    -cp.tangential_stiffness * (p.x - anchor[0]),
                    -cp.tangential_stiffness * (p.y - anchor[1]),
                    cp.stiffness * depth,
                );
                for a in 0..nv {
                    rhs[a] += h * (jac[(0, a)] * f_const.x + jac[(1, a)] * f_const.y + jac[(2, a)] * f_const.z);
                }
                active.push(ActiveFoot { index: i, depth, pos: p, anchor, jac });
            } else {
                anchors[i] = None;
            }
        }

        let mut derate = vec![1.0; n];
        if let Some(act) = &self.actuation {
            let g = act.gains;
            for j in 0..n {
                if act.mode == ActuatorMode::Nonlinear {
                    derate[j] = self.config.derating.factor(self.state.qd[j]);
                }
                let s = derate[j];
                lhs[(nb + j, nb + j)] += h * s * (g.kd + g.kp * h);
                rhs[nb + j] += h * s * g.kp * (target[j] - self.state.q[j]);
            }
        }

        let nu_star = Cholesky::new(lhs)
            .ok_or_else(|| SimulationError::Singular("implicit step matrix".into()))?
            .solve(&rhs);

        // Clamp the forces evaluated at ν' and apply them explicitly.
        let mut gen = DVector::zeros(nv);
        for foot in &active {
            let v = &foot.jac * &nu_star;
            let fn_ = (cp.stiffness * (foot.depth - h * v.z) - cp.damping * v.z).max(0.0);
            let mu = self.friction[foot.index];
            let vt = nalgebra::Vector2::new(v.x, v.y);
            let stretch = nalgebra::Vector2::new(foot.pos.x - foot.anchor[0], foot.pos.y - foot.anchor[1]) + vt * h;
            let ft = friction_force(&cp, &stretch, &vt, mu, fn_);
            // A saturated spring drags its anchor along.
            let demand = -cp.tangential_stiffness * stretch - cp.tangential_damping * vt;
            let mut anchor = foot.anchor;
            if demand.norm() > ft.norm() + 1e-12 {
                let p_end = nalgebra::Vector2::new(foot.pos.x, foot.pos.y) + vt * h;
                let a = p_end + ft / cp.tangential_stiffness;
                anchor = [a.x, a.y];
            }
            anchors[foot.index] = Some(anchor);
            let f = Vector3::new(ft.x, ft.y, fn_);
            gen += foot.jac.transpose() * f;
            let slot = &mut feet[foot.index];
            slot.in_contact = true;
            slot.normal_force = fn_;
            slot.tangential_force = [ft.x, ft.y];
        }
        let mut torques = vec![0.0; n];
        if let Some(act) = &self.actuation {
            let g = act.gains;
            for j in 0..n {
                let qd_new = nu_star[nb + j];
                let raw = g.kp * (target[j] - self.state.q[j] - h * qd_new) - g.kd * qd_new;
                let tau = raw.clamp(-g.tau_max, g.tau_max) * derate[j];
                torques[j] = tau;
                gen[nb + j] += tau;
            }
        }
        let nu_kick = &nu_half + cache.chol.solve(&gen) * h;

        // Drift.
        let mut next = self.state.clone();
        if nb == 6 {
            let w = Vector3::new(nu_kick[0], nu_kick[1], nu_kick[2]);
            let v = Vector3::new(nu_kick[3], nu_kick[4], nu_kick[5]);
            next.base_pos += kin.base_rot * v * h;
            let q = self.state.base_quat * UnitQuaternion::from_scaled_axis(w * h);
            next.base_quat = UnitQuaternion::new_normalize(q.into_inner());
        }
        for j in 0..n {
            next.q[j] += h * nu_kick[nb + j];
        }
        next.t = t + h;
        next.anchors = anchors;

        // Second half kick at the new pose.
        let new_cache = self.pose(&next)?;
        let f1 = self.non_stiff_force(&new_cache.kin, &nu_kick, t + h);
        let nu1 = &nu_kick + new_cache.chol.solve(&f1) * (0.5 * h);

        if nb == 6 {
            let r = new_cache.kin.base_rot;
            let w = Vector3::new(nu1[0], nu1[1], nu1[2]);
            let v = Vector3::new(nu1[3], nu1[4], nu1[5]);
            next.base_ang_vel = r * w;
            next.base_lin_vel = r * v;
        }
        for j in 0..n {
            next.qd[j] = nu1[nb + j];
        }
        if !next.is_finite() {
            return Err(SimulationError::NonFinite(next.t));
        }

        // Slip velocity reported at the end of the substep.
        let twist1 = if nb == 6 { Motion::from_iterator(nu1.rows(0, 6).iter().copied()) } else { Motion::zeros() };
        let vels = model.body_velocities(&new_cache.kin, &twist1, &next.qd);
        for (i, foot) in model.feet.iter().enumerate() {
            let v = model.point_velocity(&new_cache.kin, &vels, Some(foot.body), &foot.offset);
            feet[i].slip_velocity = [v.x, v.y];
        }

        self.state = next;
        self.cache = Some(new_cache);
        self.last.torques = torques;
        self.last.contacts.feet = feet;
        Ok(())
    }

    /// Contact flags and slip velocities at the current state with the
    /// explicit force law, used before any step has been taken.
    fn contact_snapshot(&self) -> ContactInfo {
        let kin = self.kinematics();
        let twist = if self.model.fixed_base { Motion::zeros() } else { self.state.body_twist() };
        let vels = self.model.body_velocities(&kin, &twist, &self.state.qd);
        let cp = self.config.contact;
        let feet = self
            .model
            .feet
            .iter()
            .enumerate()
            .map(|(i, foot)| {
                let p = kin.point_world(Some(foot.body), &foot.offset);
                let v = self.model.point_velocity(&kin, &vels, Some(foot.body), &foot.offset);
                let depth = -p.z;
                let fn_ = super::contact::normal_force(&cp, depth, v.z);
                let stretch = match self.state.anchors.get(i).copied().flatten() {
                    Some(a) => nalgebra::Vector2::new(p.x - a[0], p.y - a[1]),
                    None => nalgebra::Vector2::zeros(),
                };
                let ft = friction_force(&cp, &stretch, &nalgebra::Vector2::new(v.x, v.y), self.friction[i], fn_);
                FootContact {
                    in_contact: depth > 0.0,
                    normal_force: fn_,
                    tangential_force: [ft.x, ft.y],
                    slip_velocity: [v.x, v.y],
                    penetration: depth,
                }
            })
            .collect();
        ContactInfo { feet, body_ground_contact: false }
    }
}

/// Per-step trajectory dump: `t, q…, u…, contact…, tau…`.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, n_joints: usize, n_feet: usize) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(["px", "py", "pz", "qw", "qx", "qy", "qz"].map(String::from));
        header.extend((0..n_joints).map(|j| format!("q{j}")));
        header.extend(["vx", "vy", "vz", "wx", "wy", "wz"].map(String::from));
        header.extend((0..n_joints).map(|j| format!("qd{j}")));
        header.extend((0..n_feet).map(|i| format!("contact{i}")));
        header.extend((0..n_joints).map(|j| format!("tau{j}")));
        inner.write_record(&header)?;
        Ok(Self { inner })
    }

    pub fn record(&mut self, s: &SimState, out: &StepOutput) -> csv::Result<()> {
        let mut row = vec![s.t];
        row.extend(s.base_pos.iter());
        let qc = s.base_quat.coords;
        row.extend([qc.w, qc.x, qc.y, qc.z]);
        row.extend(&s.q);
        row.extend(s.base_lin_vel.iter());
        row.extend(s.base_ang_vel.iter());
        row.extend(&s.qd);
        row.extend(out.contacts.feet.iter().map(|f| if f.in_contact { 1.0 } else { 0.0 }));
        row.extend(&out.torques);
        self.inner.write_record(row.iter().map(|x| x.to_string()))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}
