//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines come out in order and
//! unbuffered. Criteria 1-7 are in-process oracles, 8-10 drive the `pal`
//! binary the way a user would. The process fails on any FAIL that is not
//! listed in `KNOWN_RED`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix3, Vector3};
use pal_core::dynamics::spatial::RigidInertia;
use pal_core::dynamics::{
    forward_dynamics, Actuation, ActuatorGains, ActuatorMode, Body, FootPoint, LatencyBuffer, Multibody, SimConfig,
    SimState, Simulator,
};
use pal_core::env::reward::{air_time_reward, ang_vel_reward, lin_vel_reward};
use pal_core::env::{
    assemble_observation, compute_reward, layout, ObsFrame, ObsScales, RewardInputs, TerminationCause, EST_OBS_DIM,
    LATENT_DIM, N_J, OBS_DIM,
};
use pal_core::eval::{read_csv, success_rate, tracking_rmse, ReportRow, TrackingStep};
use pal_core::morphology::{
    assemble_model, generate_robot_set, reference, sample_morphology, viability_check, GenerationConfig,
    SamplingOptions, ViabilityOptions, ViabilityOutcome, SUPPORTED_IDS,
};
use pal_core::nn::gradcheck::{max_relative_error, numerical_gradient};
use pal_core::nn::{GaussianHead, Gru, Mat, Mlp, Params};
use pal_core::ppo::trainer::IterationMetrics;
use pal_core::ppo::{compute_gae, PpoConfig};
use pal_core::seeding::rng_for;
use rand::Rng;

/// Criteria expected to fail, each analysed in the decisions ledger.
const KNOWN_RED: &[u32] = &[8];

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    check((a - b).abs() <= tol, format!("{what}: {a} vs {b}"))
}

// ---------------------------------------------------------------- 1

fn rest_frame() -> ObsFrame {
    let qn = [0.1, 0.7, -1.4, -0.1, 0.7, -1.4, 0.1, 0.7, -1.4, -0.1, 0.7, -1.4];
    ObsFrame {
        gravity_axis: [0.0, 0.0, 1.0],
        lin_vel: [0.5, -0.2, 0.1],
        ang_vel: [0.4, 0.8, -1.2],
        q: qn,
        qd: [0.0; N_J],
        q_star: [0.0; N_J],
        q_nominal: qn,
        command: [0.3, 0.2, 0.1],
        q_hist: [qn; 2],
        qd_hist: [[0.0; N_J]; 2],
        q_star_hist: [[0.0; N_J]; 2],
    }
}

fn c1_observation() -> Outcome {
    check(OBS_DIM == 168 && EST_OBS_DIM == 165, format!("constants {OBS_DIM}/{EST_OBS_DIM}"))?;
    let golden = [
        ("s_R", 0..3),
        ("s_v", 3..9),
        ("s_j", 9..33),
        ("s_star", 33..45),
        ("s_n", 45..57),
        ("s_c", 57..60),
        ("s_hq", 60..84),
        ("s_hqd", 84..108),
        ("s_hqstar", 108..132),
        ("s_d", 132..168),
    ];
    check(layout::TERMS.to_vec() == golden.to_vec(), "term layout differs from the golden table")?;
    let latent: Vec<f64> = (0..LATENT_DIM).map(|i| i as f64).collect();
    let b = assemble_observation(&rest_frame(), &latent, None, &ObsScales::default()).map_err(|e| e.to_string())?;
    check(b.s_t.len() == 168 && b.s_e.len() == 165, format!("packed {} / {}", b.s_t.len(), b.s_e.len()))?;
    check(b.s_t[132..] == latent[..] && b.s_e[129..] == latent[..], "latent slot")?;
    check(b.s_e[3..6] == b.s_t[6..9] && b.s_e[6..] == b.s_t[9..], "estimator view drops only the linear velocity")?;
    Ok("s_t 168, s_e 165, golden layout exact".into())
}

// ---------------------------------------------------------------- 2

fn c2_reward() -> Outcome {
    let tol = 1e-12;
    close(lin_vel_reward([0.4, -0.2], [0.4, -0.2]), 3.0, tol, "r_v(0)")?;
    close(ang_vel_reward(0.7, 0.7), 1.75, tol, "r_w(0)")?;
    // Standing branch rewards time on the ground: airborne feet are penalised.
    check(air_time_reward(true, 0.3) > 0.0 && air_time_reward(true, 0.0) == 0.0, "air-time zero-command sign")?;
    close(air_time_reward(true, 0.3), 0.9, tol, "air-time zero-command")?;
    close(air_time_reward(false, 0.3), 0.6, tol, "air-time moving")?;

    let q = [0.1; N_J];
    let mut qn = [0.0; N_J];
    qn[0] = 0.3;
    let (qd, qdd, tau) = ([1.0; N_J], [10.0; N_J], [2.0; N_J]);
    let (q_des, prev, prev2) = ([0.2; N_J], [0.1; N_J], [0.0; N_J]);
    let x = RewardInputs {
        command: [0.5, 0.0, 0.2],
        lin_vel: [0.3, 0.1, 0.2],
        ang_vel: [0.4, -0.6, 0.0],
        tilt: 0.3,
        base_height: 0.25,
        r_n: 0.30,
        q: &q,
        q_nominal: &qn,
        qd: &qd,
        qdd: &qdd,
        torques: &tau,
        q_des: &q_des,
        q_des_prev: &prev,
        q_des_prev2: &prev2,
        contacts: &[true, false, true, false],
        foot_slip: &[[0.3, 0.4], [9.0, 9.0], [0.0, 0.0], [1.0, 0.0]],
        t_swing: &[0.0, 0.2, 0.0, 0.7],
        collided: false,
    };
    let r = compute_reward(&x);
    let expect = [
        (r.lin_vel, 3.0 * (1.0 - (4.0 * 0.05f64).tanh()), "r_v"),
        (r.ang_vel, 1.75 * (1.0 - (2.0 * 0.04f64).tanh()), "r_w"),
        (r.orientation, -5.0 * 0.3f64.tanh().powi(2), "r_R"),
        (r.height, -20.0 * 0.0025f64.tanh(), "r_h"),
        (r.base_motion, -0.5 * (0.04 + 0.25), "r_b"),
        (r.joint_pos, -0.2 * (0.04 + 0.11), "r_q"),
        (r.joint_vel, -3e-4 * 12.0, "r_qd"),
        (r.joint_acc, -2e-7 * 1200.0, "r_qdd"),
        (r.torque, -3.5e-5 * 48.0, "r_tau"),
        (r.smooth1, -0.1 * 0.12, "r_s1"),
        (r.smooth2, 0.0, "r_s2"),
        (r.slip, -0.15 * 0.5, "r_mu"),
        (r.air_time, -3.0 * (-0.5 - 0.3 - 0.5 + 0.2), "r_a"),
        (r.termination, 0.0, "r_term"),
    ];
    for (got, want, name) in expect {
        close(got, want, tol, name)?;
    }
    check(r.total == r.sum_terms(), "total is not the sum of the terms")?;
    let hit = compute_reward(&RewardInputs { collided: true, ..x });
    close(hit.termination, -1.0, 0.0, "collision term")?;
    Ok(format!("{} terms at a hand-built state within {tol:e}", expect.len()))
}

// ---------------------------------------------------------------- 3

fn link(mass: f64, com: Vector3<f64>) -> RigidInertia {
    RigidInertia::new(mass, com, Matrix3::from_diagonal(&(Vector3::new(2e-3, 2.5e-3, 1e-3) * mass)))
}

fn one_leg(fixed: bool) -> Multibody {
    let (x, y) = (Vector3::x(), Vector3::y());
    Multibody {
        base_inertia: RigidInertia::new(6.0, Vector3::new(0.01, -0.02, 0.0), Matrix3::from_diagonal(&Vector3::new(0.03, 0.08, 0.1))),
        bodies: vec![
            Body { name: "hip".into(), parent: None, axis: x, offset: Vector3::new(0.2, 0.1, 0.0), inertia: link(0.7, Vector3::new(0.0, 0.04, 0.0)), armature: 0.0 },
            Body { name: "thigh".into(), parent: Some(0), axis: y, offset: Vector3::new(0.0, 0.08, 0.0), inertia: link(1.0, Vector3::new(0.0, 0.0, -0.1)), armature: 0.0 },
            Body { name: "shank".into(), parent: Some(1), axis: y, offset: Vector3::new(0.0, 0.0, -0.2), inertia: link(0.2, Vector3::new(0.0, 0.0, -0.1)), armature: 0.0 },
        ],
        feet: vec![FootPoint { body: 2, offset: Vector3::new(0.0, 0.0, -0.2), friction: 0.8 }],
        spheres: vec![],
        base_half_extents: Vector3::new(0.2, 0.1, 0.05),
        fixed_base: fixed,
    }
}

fn leg_state(z: f64, q: Vec<f64>) -> SimState {
    let mut s = SimState::at_rest(Vector3::new(0.0, 0.0, z), q);
    s.qd = vec![0.0; 3];
    s
}

fn c3_physics() -> Outcome {
    let err = |e: pal_core::dynamics::SimulationError| e.to_string();
    // Free fall.
    let model = one_leg(false);
    let mut sim = Simulator::new(model, SimConfig::default(), None, leg_state(10.0, vec![0.3, -0.5, 1.1]));
    let mut fall: f64 = 0.0;
    for _ in 0..50 {
        sim.step_passive(0.01).map_err(err)?;
        let t = sim.state().t;
        fall = fall.max((sim.state().base_pos.z - (10.0 - 0.5 * 9.81 * t * t)).abs());
    }
    check(fall < 1e-6, format!("free fall error {fall:e} m"))?;

    // Pendulum.
    let len = 0.37;
    let pend = Multibody {
        base_inertia: RigidInertia::zero(),
        bodies: vec![Body {
            name: "link".into(),
            parent: None,
            axis: Vector3::y(),
            offset: Vector3::zeros(),
            inertia: RigidInertia::point_mass(1.3, Vector3::new(0.0, 0.0, -len)),
            armature: 0.0,
        }],
        feet: vec![],
        spheres: vec![],
        base_half_extents: Vector3::new(0.01, 0.01, 0.01),
        fixed_base: true,
    };
    let mut pend_err: f64 = 0.0;
    for q in [-2.5, -1.0, 0.0, 0.4, 1.2, 3.0] {
        let mut s = SimState::at_rest(Vector3::new(0.0, 0.0, 1.0), vec![q]);
        s.qd = vec![0.7];
        let a = forward_dynamics(&pend, &s, &[0.0], &[], 9.81).map_err(err)?;
        pend_err = pend_err.max((a[0] + (9.81 / len) * f64::sin(q)).abs());
    }
    check(pend_err < 1e-6, format!("pendulum error {pend_err:e}"))?;

    // Coulomb cone while dragging a foot along the ground.
    let mut s = leg_state(0.45, vec![0.3, -0.5, 1.1]);
    s.base_lin_vel = Vector3::new(2.0, 0.5, -0.5);
    let gains = ActuatorGains { kp: 80.0, kd: 1.0, tau_max: 20.0 };
    let act = Actuation { gains, mode: ActuatorMode::IdealPd, latency: LatencyBuffer::new(0.0, s.q.clone(), 0.0) };
    let mut sim = Simulator::new(one_leg(false), SimConfig::default(), Some(act), s);
    let (mut worst_cone, mut contacts) = (f64::NEG_INFINITY, 0);
    for k in 0..60 {
        let target = if k % 2 == 0 { vec![1.0, -1.5, 2.0] } else { vec![-1.0, 1.5, -2.0] };
        let out = sim.step(&target, 0.01).map_err(err)?;
        for f in &out.contacts.feet {
            let ft = f.tangential_force[0].hypot(f.tangential_force[1]);
            worst_cone = worst_cone.max(ft - 0.8 * f.normal_force);
            contacts += usize::from(f.in_contact);
        }
    }
    check(contacts > 0, "foot never touched the ground")?;
    check(worst_cone <= 1e-9, format!("cone violated by {worst_cone:e} N"))?;

    // Passive swing of a hanging leg for one second.
    let mut s = leg_state(1.0, vec![0.6, -0.9, 1.4]);
    s.qd = vec![0.5, 1.0, -2.0];
    let mut sim = Simulator::new(one_leg(true), SimConfig::default(), None, s);
    let rest = Simulator::new(one_leg(true), SimConfig::default(), None, leg_state(1.0, vec![0.0; 3]));
    let e0 = sim.energy();
    let scale = e0 - rest.energy();
    let mut drift: f64 = 0.0;
    for _ in 0..100 {
        sim.step_passive(0.01).map_err(err)?;
        drift = drift.max((sim.energy() - e0).abs() / scale);
    }
    check(drift < 0.01, format!("energy drift {:.3}% in 1 s", 100.0 * drift))?;
    Ok(format!(
        "free fall {fall:.1e} m, pendulum {pend_err:.1e}, max |F_t| - mu F_n {worst_cone:.1e} N over {contacts} contacts, drift {:.4}%/s",
        100.0 * drift
    ))
}

// ---------------------------------------------------------------- 4

fn random_mat(rng: &mut impl Rng, r: usize, c: usize) -> Mat {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn with_flat<P: Params + Clone>(p: &P, flat: &[f64]) -> P {
    let mut n = p.clone();
    n.set_flat(flat).expect("same size");
    n
}

fn gru_case(len: usize, seed: u64) -> f64 {
    let mut rng = rng_for(seed, &[]);
    let g = Gru::new(5, 4, &mut rng);
    let xs: Vec<Mat> = (0..len).map(|_| random_mat(&mut rng, 5, 3)).collect();
    let c: Vec<Mat> = (0..len).map(|_| random_mat(&mut rng, 4, 3)).collect();
    let h0 = random_mat(&mut rng, 4, 3) * 0.5;
    let loss = |n: &Gru| -> f64 {
        let tr = n.forward_seq(&xs, &h0, None).expect("shapes");
        tr.hs.iter().zip(&c).map(|(h, w)| h.component_mul(w).sum()).sum()
    };
    let tr = g.forward_seq(&xs, &h0, None).expect("shapes");
    let analytic = g.backward_seq(&tr, &c).expect("shapes").0.to_flat();
    let num = numerical_gradient(|p| loss(&with_flat(&g, p)), &g.to_flat(), 1e-5);
    max_relative_error(&analytic, &num, 1e-6)
}

fn c4_gradients() -> Outcome {
    let mut rng = rng_for(2, &[]);
    let net = Mlp::new(&[6, 9, 7, 4], 1.0, &mut rng);
    let x = random_mat(&mut rng, 6, 5);
    let c = random_mat(&mut rng, 4, 5);
    let cache = net.forward(&x).map_err(|e| e.to_string())?;
    let (g, _) = net.backward(&cache, &c);
    let num = numerical_gradient(|p| with_flat(&net, p).predict(&x).expect("shapes").component_mul(&c).sum(), &net.to_flat(), 1e-5);
    let mlp = max_relative_error(&g.to_flat(), &num, 1e-6);

    let gru = gru_case(1, 5);
    let bptt = gru_case(50, 6);

    let mut head = GaussianHead::new(5, 0.6, true);
    let flat: Vec<f64> = (0..head.n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
    head.set_flat(&flat).map_err(|e| e.to_string())?;
    let mean = random_mat(&mut rng, 5, 3);
    let act = random_mat(&mut rng, 5, 3) * 1.5;
    let w = [0.7, -1.3, 2.0];
    let total = |h: &GaussianHead, m: &Mat| h.log_prob(m, &act).iter().zip(&w).map(|(l, k)| l * k).sum::<f64>();
    let (dm, dls) = head.log_prob_grads(&mean, &act, &w);
    let num_m = numerical_gradient(|p| total(&head, &Mat::from_column_slice(5, 3, p)), mean.as_slice(), 1e-5);
    let num_s = numerical_gradient(|p| total(&with_flat(&head, p), &mean), &head.to_flat(), 1e-5);
    let gauss = max_relative_error(dm.as_slice(), &num_m, 1e-6).max(max_relative_error(dls.as_slice(), &num_s, 1e-6));

    let worst = mlp.max(gru).max(bptt).max(gauss);
    let detail = format!("max rel err: mlp {mlp:.1e}, gru {gru:.1e}, bptt(50) {bptt:.1e}, gaussian {gauss:.1e}");
    check(worst < 1e-4, detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 5

fn brute_gae(r: &[f64], v: &[f64], d: &[bool], nv: &[f64], g: f64, l: f64) -> Vec<f64> {
    (0..r.len())
        .map(|t| {
            let (mut a, mut w) = (0.0, 1.0);
            for k in t..r.len() {
                a += w * (r[k] + g * nv[k] - v[k]);
                if d[k] {
                    break;
                }
                w *= g * l;
            }
            a
        })
        .collect()
}

fn c5_gae() -> Outcome {
    let mut rng = rng_for(5, &[]);
    let mut worst: f64 = 0.0;
    let cases = 200;
    for _ in 0..cases {
        let n = 10;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        d[n - 1] = rng.random_bool(0.5);
        let nv: Vec<f64> = (0..n).map(|i| if d[i] { 0.0 } else { rng.random_range(-5.0..5.0) }).collect();
        let (g, l) = (rng.random_range(0.9..1.0), rng.random_range(0.0..=1.0));
        let (adv, ret) = compute_gae(&r, &v, &d, &nv, g, l);
        for (t, b) in brute_gae(&r, &v, &d, &nv, g, l).iter().enumerate() {
            worst = worst.max((adv[t] - b).abs()).max((ret[t] - b - v[t]).abs());
        }
    }
    check(worst < 1e-10, format!("GAE mismatch {worst:e}"))?;
    let c = PpoConfig::default();
    check((c.n_env, c.steps_per_iter, c.batch_size()) == (450, 140, 63_000), format!("batch {}", c.batch_size()))?;
    Ok(format!("{cases} random 10-step cases, max error {worst:.1e}; batch 450x140 = 63000"))
}

// ---------------------------------------------------------------- 6

fn c6_generation(robots_out: &Path) -> Outcome {
    let opts = SamplingOptions::default();
    for id in SUPPORTED_IDS {
        let r = reference(id).map_err(|e| e.to_string())?;
        let mut rng = rng_for(11, &[id as u64]);
        for i in 0..10_000 {
            let p = sample_morphology(&r, &mut rng, &opts);
            p.validate(&r, &opts.latency).map_err(|e| format!("id {id} sample {i}: {e}"))?;
        }
        let m = assemble_model(&r.defaults, &r).map_err(|e| e.to_string())?;
        let out = viability_check(&m, &SimConfig::default(), &ViabilityOptions::default());
        check(out == ViabilityOutcome::Viable, format!("reference {id} stand-in: {out:?}"))?;
    }
    let cfg = GenerationConfig::default();
    let (set, report) = generate_robot_set(&SUPPORTED_IDS, 50, 7, &cfg).map_err(|e| e.to_string())?;
    let mut rates = Vec::new();
    for id in SUPPORTED_IDS {
        let n = set.robots.iter().filter(|e| e.ref_id == id).count();
        check(n == 50, format!("id {id}: {n} robots"))?;
        rates.push(format!("{id}:{:.2}", report.per_reference[&id].acceptance_rate));
    }
    std::fs::write(robots_out, set.to_json()).map_err(|e| e.to_string())?;
    Ok(format!("4x10000 samples in bounds, stand-ins viable, 4x50 robots (acceptance {})", rates.join(" ")))
}

// ---------------------------------------------------------------- 7

fn step(cmd: [f64; 3], meas: [f64; 3], i: usize) -> TrackingStep {
    TrackingStep {
        rollout: 0,
        step: i,
        t: i as f64 * 0.01,
        cmd_vx: cmd[0],
        cmd_vy: cmd[1],
        cmd_wz: cmd[2],
        vx: meas[0],
        vy: meas[1],
        wz: meas[2],
        est_vx: 0.0,
        est_vy: 0.0,
        est_vz: 0.0,
        true_vx: 0.0,
        true_vy: 0.0,
        true_vz: 0.0,
    }
}

fn c7_metrics() -> Outcome {
    use TerminationCause as C;
    let sr = |o: &[C]| success_rate(o).map_err(|e| e.to_string());
    let mut o = vec![C::Timeout; 100];
    check(sr(&o)? == 1.0, "all timeouts")?;
    for c in o.iter_mut().take(25) {
        *c = C::GroundCollision;
    }
    o[30] = C::SelfCollision;
    check(sr(&o)? == 1.0 - 26.0 / 100.0, "26 failures of 100")?;
    check(sr(&[C::SelfCollision; 3])? == 0.0, "all failures")?;
    check(success_rate(&[]).is_err() && success_rate(&[C::SimFault]).is_err(), "empty or faulted lists must error")?;

    let c = [0.5, -0.2, 0.3];
    let bias: Vec<_> = (0..7).map(|i| step(c, [0.4, -0.2, 0.3], i)).collect();
    let r = tracking_rmse(&bias).map_err(|e| e.to_string())?;
    close(r[0], 0.1, 1e-12, "constant bias")?;
    check(r[1] == 0.0 && r[2] == 0.0, "untouched axes")?;
    let alt: Vec<_> = (0..100)
        .map(|i| {
            let s = if i % 2 == 0 { 0.3 } else { -0.3 };
            step([0.0; 3], [s, -s, s], i)
        })
        .collect();
    for v in tracking_rmse(&alt).map_err(|e| e.to_string())? {
        close(v, 0.3, 1e-12, "alternating residual")?;
    }
    Ok("SR scripted lists exact; RMSE bias and alternating cases within 1e-12".into())
}

// ---------------------------------------------------------------- CLI helpers

fn pal(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pal"))
        .args(args)
        .current_dir(dir)
        .env_remove("PAL_METRICS_DIR")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("pal {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Smoke config with paths relative to the working directory.
fn smoke_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> Result<PathBuf, String> {
    let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.json");
    let text = std::fs::read_to_string(&base).map_err(|e| format!("{}: {e}", base.display()))?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    v["paths"] = serde_json::json!({ "robots": "robots.json", "checkpoints": "ck", "metrics": "metrics" });
    edit(&mut v);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&v).expect("json")).map_err(|e| e.to_string())?;
    Ok(path)
}

fn train_rows(path: &Path) -> Result<Vec<IterationMetrics>, String> {
    read_csv(path).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- 8

fn c8_learning(dir: &Path) -> Outcome {
    smoke_config(dir, |_| {})?;
    pal(dir, &["gen-robots", "--config", "config.json"])?;
    pal(dir, &["train", "--config", "config.json"])?;
    let rows = train_rows(&dir.join("metrics/train.csv"))?;
    check(rows.len() >= 300, format!("only {} iterations", rows.len()))?;
    let r: Vec<f64> = rows.iter().map(|m| m.mean_reward).collect();
    let ma: Vec<f64> = r.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    let drops = ma.windows(2).filter(|w| w[1] <= w[0]).count();
    let mean = |xs: &[IterationMetrics]| xs.iter().map(|m| m.mean_episode_length).sum::<f64>() / xs.len() as f64;
    let (first, last) = (mean(&rows[..10]), mean(&rows[rows.len() - 10..]));
    let ratio = last / first;
    let detail = format!(
        "{} iterations; 10-iter MA reward {:.4} -> {:.4} (max {:.4}), non-increasing in {drops}/{} steps; \
         episode length {first:.1} -> {last:.1} ({ratio:.2}x)",
        rows.len(),
        ma[0],
        ma[ma.len() - 1],
        ma.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ma.len() - 1
    );
    if drops == 0 && ratio >= 2.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 9

const ID_SETS: [&str; 3] = ["1", "1,4", "1,2,4,5"];

fn c9_parity(dir: &Path, robots: &Path) -> Outcome {
    std::fs::copy(robots, dir.join("robots.json")).map_err(|e| e.to_string())?;
    smoke_config(dir, |v| {
        v["ppo"]["iterations"] = 30.into();
        v["ppo"]["dim_rounds"] = 2.into();
        v["eval"]["protocol"]["rollouts"] = 10.into();
    })?;
    let mut checkpoints = Vec::new();
    for variant in ["pal", "moral"] {
        for ids in ID_SETS {
            let tag = format!("{variant}_{}", ids.replace(',', ""));
            let (ck, metrics) = (format!("runs/{tag}/ck"), format!("runs/{tag}/metrics"));
            pal(dir, &["train", "--config", "config.json", "--variant", variant, "--ids", ids, "--checkpoint-dir", &ck, "--metrics-dir", &metrics])?;
            checkpoints.push(format!("{ck}/checkpoint.json"));
        }
    }
    let mut args = vec!["eval", "--config", "config.json", "--zero-shot", "--metrics-dir", "report"];
    for ck in &checkpoints {
        args.extend(["--checkpoint", ck.as_str()]);
    }
    pal(dir, &args)?;
    let rows: Vec<ReportRow> = read_csv(&dir.join("report/report.csv")).map_err(|e| e.to_string())?;
    let policies: BTreeSet<(String, String)> = rows.iter().map(|r| (r.variant.clone(), r.ids.clone())).collect();
    let models: BTreeSet<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    check(policies.len() == 6, format!("{} variant x ID-set rows", policies.len()))?;
    check(rows.len() == policies.len() * models.len(), format!("{} rows for {} models", rows.len(), models.len()))?;
    let mut seeds: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
    for r in &rows {
        seeds.entry(r.model.as_str()).or_default().insert(r.seed);
        check(r.n_total > 0 && (0.0..=1.0).contains(&r.sr), format!("row {} {} {}: n_total {}", r.variant, r.ids, r.model, r.n_total))?;
    }
    check(seeds.values().all(|s| s.len() == 1), "evaluation seeds differ between policies for a model")?;

    let mut table = String::new();
    for r in &rows {
        table.push_str(&format!(
            "\n    {:<6} {:<8} {:<13} SR {:.2}  rmse x {:.3} y {:.3} yaw {:.3}  est x {:.3} y {:.3} z {:.3}",
            r.variant, r.ids, r.model, r.sr, r.rmse_x, r.rmse_y, r.rmse_yaw, r.est_rmse_x, r.est_rmse_y, r.est_rmse_z
        ));
    }
    Ok(format!("6 policies x {} unseen models, one seed per model{table}", models.len()))
}

// ---------------------------------------------------------------- 10

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn c10_determinism(a: &Path, b: &Path) -> Outcome {
    let script: &[&[&str]] = &[
        &["gen-robots", "--config", "config.json", "--refs", "1,4", "--count", "2"],
        &["train", "--config", "config.json", "--ids", "1,4", "--iterations", "6"],
        &["eval", "--config", "config.json", "--sweep", "friction", "--grid", "0.3,0.8", "--rollouts", "3", "--duration", "2", "--metrics-dir", "sweep"],
        &["eval", "--config", "config.json", "--tracking", "--rollouts", "2", "--duration", "2", "--metrics-dir", "tracking"],
        &["eval", "--config", "config.json", "--zero-shot", "--rollouts", "2", "--duration", "2", "--metrics-dir", "zero_shot"],
    ];
    for dir in [a, b] {
        smoke_config(dir, |v| v["ppo"]["dim_rounds"] = 2.into())?;
        for args in script {
            pal(dir, args)?;
        }
    }
    let (fa, fb) = (files_under(a), files_under(b));
    check(fa == fb, format!("file sets differ: {fa:?} vs {fb:?}"))?;
    let mut compared = 0;
    for f in &fa {
        // Wall-clock durations only.
        if f.file_name().is_some_and(|n| n == "timing.csv") {
            continue;
        }
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        check(x.is_ok() && x.ok() == y.ok(), format!("{} differs between reruns", f.display()))?;
        compared += 1;
    }
    Ok(format!("{compared} files byte-identical across two runs of 5 commands (timing.csv excluded)"))
}

// ---------------------------------------------------------------- driver

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let sub = |name: &str| {
        let p = tmp.path().join(name);
        std::fs::create_dir_all(&p).expect("mkdir");
        p
    };
    let robots = tmp.path().join("robots_4x50.json");
    let budgets = [1.0, 1.0, 30.0, 60.0, 5.0, 600.0, 1.0, 7200.0];

    let mut results: Vec<(u32, bool)> = Vec::new();
    let mut report = |n: u32, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let out = f();
        let dt = t0.elapsed();
        let over = budgets.get(n as usize - 1).is_some_and(|&b| dt > Duration::from_secs_f64(b));
        let (pass, detail) = match out {
            Ok(d) if over => (false, format!("{d}; over the {:.0} s budget", budgets[n as usize - 1])),
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let known = if !pass && KNOWN_RED.contains(&n) { " (known red)" } else { "" };
        println!("criterion {n:>2}: {}{known} [{:.2} s] {detail}", if pass { "PASS" } else { "FAIL" }, dt.as_secs_f64());
        results.push((n, pass));
    };

    report(1, &mut c1_observation);
    report(2, &mut c2_reward);
    report(3, &mut c3_physics);
    report(4, &mut c4_gradients);
    report(5, &mut c5_gae);
    report(6, &mut || c6_generation(&robots));
    report(7, &mut c7_metrics);
    report(8, &mut || c8_learning(&sub("c8")));
    report(9, &mut || if robots.exists() { c9_parity(&sub("c9"), &robots) } else { Err("no robot set from criterion 6".into()) });
    report(10, &mut || c10_determinism(&sub("c10a"), &sub("c10b")));

    let passed = results.iter().filter(|r| r.1).count();
    let unexpected: Vec<u32> = results.iter().filter(|r| !r.1 && !KNOWN_RED.contains(&r.0)).map(|r| r.0).collect();
    println!("acceptance: {passed}/{} PASS; known red {KNOWN_RED:?}; unexpected failures {unexpected:?}", results.len());
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
