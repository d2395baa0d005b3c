use nalgebra::Vector3;
use pal_core::dynamics::{SimConfig, Simulator};
use pal_core::morphology::*;
use pal_core::seeding::rng_for;

fn straight_leg_params(c_fz: f64) -> (MorphologyParams, ReferenceModel) {
    let mut r = reference(1).unwrap();
    r.shank_length = 0.0;
    let mut p = r.defaults.clone();
    for leg in 0..N_LEGS {
        p.joint_offsets[3 * leg] = [0.2, 0.05, 0.0];
        p.joint_offsets[3 * leg + 1] = [0.0, 0.08, 0.0];
        p.joint_offsets[3 * leg + 2] = [0.0, 0.0, -0.24];
        p.foot_offsets[leg] = c_fz;
    }
    p.nominal = vec![0.0; N_JOINTS];
    (p, r)
}

#[test]
fn ten_thousand_samples_stay_in_bounds() {
    let opts = SamplingOptions::default();
    for id in SUPPORTED_IDS {
        let r = reference(id).unwrap();
        let mut rng = rng_for(11, &[id as u64]);
        for i in 0..10_000 {
            let p = sample_morphology(&r, &mut rng, &opts);
            if let Err(e) = p.validate(&r, &opts.latency) {
                panic!("id {id}, sample {i}: {e}");
            }
        }
    }
}

#[test]
fn sampled_rows_match_table_examples() {
    let opts = SamplingOptions::default();
    let a1 = reference(1).unwrap();
    let c = reference(5).unwrap();
    let mut rng = rng_for(3, &[0]);
    for _ in 0..500 {
        let p = sample_morphology(&a1, &mut rng, &opts);
        assert!((2.0..=28.0).contains(&p.base_mass));
        let q = sample_morphology(&c, &mut rng, &opts);
        assert!((35.0..=120.0).contains(&q.kp));
    }
}

#[test]
fn sampling_is_deterministic() {
    let r = reference(1).unwrap();
    let opts = SamplingOptions::default();
    let a = sample_morphology(&r, &mut rng_for(42, &[]), &opts);
    let b = sample_morphology(&r, &mut rng_for(42, &[]), &opts);
    assert_eq!(a, b);
}

#[test]
fn straight_leg_nominal_height() {
    for c_fz in [0.02, 0.05, 0.1] {
        let (p, r) = straight_leg_params(c_fz);
        let m = assemble_model(&p, &r).unwrap();
        assert!((m.r_n - (0.24 + c_fz)).abs() < 1e-12, "r_n = {}", m.r_n);
    }
}

#[test]
fn tree_topology_and_mass() {
    let r = reference(1).unwrap();
    let mut rng = rng_for(5, &[]);
    let opts = SamplingOptions::default();
    for _ in 0..20 {
        let p = sample_morphology(&r, &mut rng, &opts);
        let Ok(m) = build_kinematic_tree(&p, &r, &opts.latency) else { continue };
        assert_eq!(m.multibody.dof(), 12);
        assert_eq!(m.multibody.feet.len(), 4);
        assert!((m.total_mass() - p.total_mass()).abs() < 1e-9);
    }
}

#[test]
fn mirrored_legs_are_symmetric() {
    let r = reference(4).unwrap();
    let m = assemble_model(&r.defaults, &r).unwrap();
    let kin = m.multibody.kinematics(&Vector3::zeros(), &nalgebra::UnitQuaternion::identity(), &m.nominal);
    let foot = |i: usize| kin.point_world(Some(m.multibody.feet[i].body), &m.multibody.feet[i].offset);
    let (fl, fr, hl) = (foot(0), foot(1), foot(2));
    assert!((fl.y + fr.y).abs() < 1e-12 && (fl.x - fr.x).abs() < 1e-12);
    // Configuration X: hind legs mirror the front ones about the lateral plane.
    assert!((fl.x + hl.x).abs() < 1e-12 && (fl.z - hl.z).abs() < 1e-12);
}

#[test]
fn out_of_bounds_params_are_rejected() {
    let r = reference(1).unwrap();
    let lat = SamplingOptions::default().latency;
    let mut p = r.defaults.clone();
    p.base_mass = 40.0;
    assert!(matches!(build_kinematic_tree(&p, &r, &lat), Err(MorphologyError::OutOfBounds { .. })));
    let (mut q, r0) = straight_leg_params(0.05);
    q.joint_offsets[2] = [0.0, 0.0, -0.005];
    assert!(matches!(assemble_model(&q, &r0), Err(MorphologyError::Degenerate(_))));
}

#[test]
fn unsupported_reference() {
    assert_eq!(reference(3).unwrap_err(), MorphologyError::UnsupportedReference(3));
    let cfg = GenerationConfig::default();
    assert_eq!(generate_robot_set(&[3], 1, 0, &cfg).unwrap_err(), MorphologyError::UnsupportedReference(3));
    assert_eq!(generate_robot_set(&[1], 0, 0, &cfg).unwrap_err(), MorphologyError::InvalidCount);
}

#[test]
fn reference_stand_ins_are_viable() {
    for id in SUPPORTED_IDS {
        let r = reference(id).unwrap();
        let m = assemble_model(&r.defaults, &r).unwrap();
        let out = viability_check(&m, &SimConfig::default(), &ViabilityOptions::default());
        assert_eq!(out, ViabilityOutcome::Viable, "id {id}");
    }
}

#[test]
fn folded_front_legs_self_collide() {
    let r = reference(1).unwrap();
    let mut p = r.defaults.clone();
    for leg in 0..2 {
        p.joint_offsets[3 * leg + 1] = [0.0, 0.0, 0.0];
        p.nominal[3 * leg + 1] = std::f64::consts::PI;
        p.nominal[3 * leg + 2] = -std::f64::consts::PI;
    }
    let m = assemble_model(&p, &r).unwrap();
    let out = viability_check(&m, &SimConfig::default(), &ViabilityOptions::default());
    assert_eq!(out, ViabilityOutcome::SelfCollision);
}

#[test]
fn heavy_weak_robot_outcome_is_deterministic() {
    let r = reference(1).unwrap();
    let t = &r.sampling_table;
    let mut p = r.defaults.clone();
    for leg in 0..N_LEGS {
        p.link_masses[3 * leg] = t.m_hip.hi;
        p.link_masses[3 * leg + 1] = t.m_thigh.hi;
        p.link_masses[3 * leg + 2] = t.m_shank.hi;
    }
    p.tau_max = t.tau_max.lo;
    p.kp = t.kp.lo;
    let m = assemble_model(&p, &r).unwrap();
    let opts = ViabilityOptions::default();
    let a = viability_check(&m, &SimConfig::default(), &opts);
    let b = viability_check(&m, &SimConfig::default(), &opts);
    assert_eq!(a, b);
    assert!(!a.is_viable(), "outcome {a:?}");
}

#[test]
fn standing_height_holds_still() {
    for id in SUPPORTED_IDS {
        let r = reference(id).unwrap();
        let m = assemble_model(&r.defaults, &r).unwrap();
        let st = m.standing_state(0.02, m.nominal.clone());
        let mut sim = Simulator::new(m.multibody.clone(), SimConfig::default(), Some(m.actuation(0.0)), st);
        for _ in 0..300 {
            sim.step(&m.nominal, 0.01).unwrap();
        }
        let z0 = sim.state().base_pos.z;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            sim.step(&m.nominal, 0.01).unwrap();
            worst = worst.max((sim.state().base_pos.z - z0).abs());
        }
        assert!(worst < 1e-3, "id {id}: height moved {worst} m");
    }
}

fn settled_a1() -> (RobotModel, Simulator) {
    let r = reference(1).unwrap();
    let m = assemble_model(&r.defaults, &r).unwrap();
    let st = m.standing_state(0.02, m.nominal.clone());
    let mut sim = Simulator::new(m.multibody.clone(), SimConfig::default(), Some(m.actuation(0.0)), st);
    for _ in 0..200 {
        sim.step(&m.nominal, 0.01).unwrap();
    }
    (m, sim)
}

#[test]
fn lateral_push_impulse() {
    let (m, mut sim) = settled_a1();
    let (force, dt) = (2000.0, 0.01);
    let v0 = sim.state().base_lin_vel.y;
    sim.apply_external_push(Vector3::new(0.0, force, 0.0), dt);
    sim.step(&m.nominal, dt).unwrap();
    let dv = sim.state().base_lin_vel.y - v0;
    let expected = force * dt / m.total_mass();
    assert!(((dv - expected) / expected).abs() < 0.1, "dv {dv} vs {expected}");
}

#[test]
fn zero_push_changes_nothing() {
    let (m, mut a) = settled_a1();
    let (_, mut b) = settled_a1();
    b.apply_external_push(Vector3::zeros(), 0.5);
    for _ in 0..60 {
        a.step(&m.nominal, 0.01).unwrap();
        b.step(&m.nominal, 0.01).unwrap();
    }
    assert_eq!(a.state(), b.state());
}

fn small_cfg() -> GenerationConfig {
    GenerationConfig::default()
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let cfg = small_cfg();
    let (a, rep) = generate_robot_set(&[1, 4], 3, 9, &cfg).unwrap();
    let (b, _) = generate_robot_set(&[1, 4], 3, 9, &cfg).unwrap();
    assert_eq!(a.len(), 6);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(rep.per_reference[&1].accepted, 3);
    let lat = cfg.sampling.latency;
    let back = RobotSet::from_json(&a.to_json(), &lat).unwrap();
    assert_eq!(back, a);
    for (i, e) in a.robots.iter().enumerate() {
        let m = a.build(i).unwrap();
        assert_eq!(m.r_n, e.r_n);
    }
}

#[test]
fn corrupted_robot_file_is_rejected() {
    let cfg = small_cfg();
    let (set, _) = generate_robot_set(&[1], 1, 2, &cfg).unwrap();
    let lat = cfg.sampling.latency;
    let mut bad = set.clone();
    bad.robots[0].r_n += 0.01;
    assert!(matches!(RobotSet::from_json(&bad.to_json(), &lat), Err(MorphologyError::Format(_))));
    let mut bad = set.clone();
    bad.schema_version = 99;
    assert!(RobotSet::from_json(&bad.to_json(), &lat).is_err());
    assert!(RobotSet::from_json("{", &lat).is_err());
}

#[test]
fn resampling_replaces_a_fifth() {
    let cfg = small_cfg();
    let (set, _) = generate_robot_set(&[1], 50, 4, &cfg).unwrap();
    let (next, idx) = resample_fraction(&set, 0.2, &mut rng_for(1, &[]), &cfg).unwrap();
    assert_eq!(idx.len(), 10);
    let mut changed = 0;
    for i in 0..50 {
        if idx.contains(&i) {
            assert_eq!(next.robots[i].ref_id, 1);
            changed += usize::from(next.robots[i] != set.robots[i]);
        } else {
            assert_eq!(next.robots[i], set.robots[i]);
        }
    }
    assert_eq!(changed, 10);
    let (again, idx2) = resample_fraction(&set, 0.2, &mut rng_for(1, &[]), &cfg).unwrap();
    assert_eq!(idx, idx2);
    assert_eq!(again, next);
    let (same, none) = resample_fraction(&set, 0.0, &mut rng_for(1, &[]), &cfg).unwrap();
    assert!(none.is_empty());
    assert_eq!(same, set);
}
