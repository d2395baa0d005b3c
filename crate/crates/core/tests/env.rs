use std::sync::Arc;

use pal_core::dynamics::CollisionEvents;
use pal_core::env::reward::{air_time_reward, ang_vel_reward, lin_vel_reward, TERM_NAMES};
use pal_core::env::*;
use pal_core::morphology::{assemble_model, reference, RobotModel};
use pal_core::seeding::rng_for;
use proptest::prelude::*;

fn a1() -> Arc<RobotModel> {
    let r = reference(1).unwrap();
    Arc::new(assemble_model(&r.defaults, &r).unwrap())
}

fn rest_frame() -> ObsFrame {
    let qn = [0.1, 0.7, -1.4, -0.1, 0.7, -1.4, 0.1, 0.7, -1.4, -0.1, 0.7, -1.4];
    ObsFrame {
        gravity_axis: [0.0, 0.0, 1.0],
        lin_vel: [0.0; 3],
        ang_vel: [0.0; 3],
        q: qn,
        qd: [0.0; N_J],
        q_star: [0.0; N_J],
        q_nominal: qn,
        command: [0.0; 3],
        q_hist: [qn; 2],
        qd_hist: [[0.0; N_J]; 2],
        q_star_hist: [[0.0; N_J]; 2],
    }
}

#[test]
fn golden_layout() {
    let expect = [
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
    assert_eq!(layout::TERMS.to_vec(), expect.to_vec());
    let mut end = 0;
    for (_, r) in layout::TERMS {
        assert_eq!(r.start, end);
        end = r.end;
    }
    assert_eq!(end, OBS_DIM);
    assert_eq!(layout::S_STAR.end, X_DIM);
    assert_eq!(observation::estimator_range(layout::S_D), 129..165);
    assert_eq!(observation::estimator_range(layout::S_V), 3..6);
}

#[test]
fn packing_puts_each_term_in_its_slot() {
    let mut f = rest_frame();
    f.lin_vel = [0.5, -0.2, 0.1];
    f.ang_vel = [0.4, 0.8, -1.2];
    f.qd[3] = 2.0;
    f.command = [0.3, 0.2, 0.1];
    f.q_star_hist[1][11] = 0.7;
    let latent: Vec<f64> = (0..LATENT_DIM).map(|i| i as f64 / 100.0).collect();
    let sc = ObsScales::default();
    let b = assemble_observation(&f, &latent, None, &sc).unwrap();
    assert_eq!((b.s_t.len(), b.s_e.len(), b.x_t.len(), b.s_d.len()), (168, 165, 45, 36));
    assert_eq!(&b.s_t[3..6], &[0.5, -0.2, 0.1]);
    assert_eq!(&b.s_t[6..9], &[0.1, 0.2, -0.3]);
    assert_eq!(b.s_t[9 + 12 + 3], 2.0 * sc.joint_vel);
    assert_eq!(&b.s_t[57..60], &[0.3, 0.2, 0.1]);
    assert_eq!(b.s_t[108 + 12 + 11], 0.7);
    assert_eq!(&b.s_t[132..], latent.as_slice());
    assert_eq!(b.x_t, b.s_t[..45].to_vec());
    // s_e is s_t with the six twist entries replaced by the three angular ones.
    assert_eq!(&b.s_e[..3], &b.s_t[..3]);
    assert_eq!(&b.s_e[3..6], &b.s_t[6..9]);
    assert_eq!(&b.s_e[6..], &b.s_t[9..]);

    let est = assemble_observation(&f, &latent, Some([9.0, 9.0, 9.0]), &sc).unwrap();
    assert_eq!(&est.s_t[3..6], &[9.0, 9.0, 9.0]);
    assert_eq!(est.s_e, b.s_e);
}

#[test]
fn nominal_rest_observation() {
    let b = assemble_observation(&rest_frame(), &[0.0; LATENT_DIM], None, &ObsScales::default()).unwrap();
    assert_eq!(&b.s_t[layout::S_R], &[0.0, 0.0, 1.0]);
    assert!(b.s_t[layout::S_V].iter().all(|&v| v == 0.0));
    assert!(b.s_t[layout::S_STAR].iter().all(|&v| v == 0.0));
}

#[test]
fn latent_length_is_checked() {
    let err = assemble_observation(&rest_frame(), &[0.0; 35], None, &ObsScales::default()).unwrap_err();
    assert!(matches!(err, EnvError::Observation(_)));
}

#[test]
fn reward_examples() {
    assert_eq!(lin_vel_reward([0.4, -0.2], [0.4, -0.2]), 3.0);
    assert_eq!(ang_vel_reward(0.7, 0.7), 1.75);
    let r = lin_vel_reward([1.0, 0.0], [0.0, 0.0]);
    assert!((r - 3.0 * (1.0 - 4f64.tanh())).abs() < 1e-12);
    assert!((r - 0.00201).abs() < 5e-6);
    assert!((air_time_reward(true, 0.3) - 0.9).abs() < 1e-12);
    assert!((air_time_reward(false, 0.3) - 0.6).abs() < 1e-12);
}

#[test]
fn every_term_at_a_hand_built_state() {
    let q = [0.1; N_J];
    let mut qn = [0.0; N_J];
    qn[0] = 0.3;
    let qd = [1.0; N_J];
    let qdd = [10.0; N_J];
    let tau = [2.0; N_J];
    let q_des = [0.2; N_J];
    let prev = [0.1; N_J];
    let prev2 = [0.0; N_J];
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
    let close = |a: f64, b: f64| assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    close(r.lin_vel, 3.0 * (1.0 - (4.0 * (0.04 + 0.01f64)).tanh()));
    close(r.ang_vel, 1.75 * (1.0 - (2.0 * 0.04f64).tanh()));
    close(r.orientation, -5.0 * 0.3f64.tanh().powi(2));
    close(r.height, -20.0 * 0.0025f64.tanh());
    close(r.base_motion, -0.5 * (0.04 + 0.25 * 1.0));
    close(r.joint_pos, -0.2 * (0.04 + 11.0 * 0.01));
    close(r.joint_vel, -3e-4 * 12.0);
    close(r.joint_acc, -2e-7 * 1200.0);
    close(r.torque, -3.5e-5 * 48.0);
    close(r.smooth1, -0.1 * 12.0 * 0.01);
    close(r.smooth2, 0.0);
    close(r.slip, -0.15 * 0.5);
    close(r.air_time, -3.0 * ((0.0 - 0.5) + (0.2 - 0.5) + (0.0 - 0.5) + (0.7 - 0.5)));
    assert_eq!(r.termination, 0.0);
    assert_eq!(r.total, r.sum_terms());

    let hit = compute_reward(&RewardInputs { collided: true, ..x });
    assert_eq!(hit.termination, -1.0);
    assert_eq!(hit.total - r.total, -1.0);
    assert_eq!(TERM_NAMES.len(), r.terms().len());
}

#[test]
fn termination_rules() {
    let none = CollisionEvents::default();
    let ground = CollisionEvents { ground: true, self_collision: false };
    assert_eq!(check_termination(&ground, 10, 600), (true, Some(TerminationCause::GroundCollision), -1.0));
    assert_eq!(check_termination(&none, 600, 600), (true, Some(TerminationCause::Timeout), 0.0));
    assert_eq!(check_termination(&none, 300, 600), (false, None, 0.0));
    let selfc = CollisionEvents { ground: false, self_collision: true };
    assert_eq!(check_termination(&selfc, 600, 600).1, Some(TerminationCause::SelfCollision));
    assert!(!TerminationCause::Timeout.is_failure());
    assert!(!TerminationCause::SimFault.is_failure());
    for c in [
        TerminationCause::GroundCollision,
        TerminationCause::SelfCollision,
        TerminationCause::Timeout,
        TerminationCause::SimFault,
    ] {
        assert_eq!(c.as_str().parse::<TerminationCause>().unwrap(), c);
    }
}

#[test]
fn command_monte_carlo() {
    let ranges = CommandRanges { zero_probability: 0.0, ..Default::default() };
    let mut rng = rng_for(17, &[]);
    let n = 100_000;
    let mut sum = [0.0; 3];
    for _ in 0..n {
        let c = sample_command(&mut rng, &ranges);
        assert!(c.vx.abs() <= 1.0 && c.vy.abs() <= 0.75 && c.wz.abs() <= 1.5);
        assert!((3.0..=6.0).contains(&c.remaining));
        for (s, v) in sum.iter_mut().zip(c.as_array()) {
            *s += v;
        }
    }
    for s in sum {
        assert!((s / n as f64).abs() < 0.02);
    }
    let a = sample_command(&mut rng_for(3, &[]), &CommandRanges::default());
    let b = sample_command(&mut rng_for(3, &[]), &CommandRanges::default());
    assert_eq!(a, b);
}

#[test]
fn zero_command_rate() {
    let mut rng = rng_for(5, &[]);
    let n = 20_000;
    let zeros = (0..n).filter(|_| sample_command(&mut rng, &CommandRanges::default()).is_zero()).count();
    let p = zeros as f64 / n as f64;
    assert!((p - 0.1).abs() < 0.01, "{p}");
}

proptest! {
    #[test]
    fn timers_reset_on_transitions(seq in proptest::collection::vec(proptest::array::uniform4(any::<bool>()), 1..60)) {
        let dt = 0.01;
        let mut sw = [0.0; 4];
        let mut st = [0.0; 4];
        let mut prev = [true; 4];
        for now in seq {
            update_timers(&mut sw, &mut st, &prev, &now, dt);
            for i in 0..4 {
                prop_assert!(sw[i] >= 0.0 && st[i] >= 0.0);
                if !prev[i] && now[i] {
                    prop_assert_eq!(sw[i], 0.0);
                }
                if prev[i] && !now[i] {
                    prop_assert_eq!(st[i], 0.0);
                }
                if now[i] { prop_assert_eq!(sw[i], 0.0); } else { prop_assert_eq!(st[i], 0.0); }
            }
            prev = now;
        }
    }

    #[test]
    fn reward_signs(
        e in proptest::array::uniform3(-3.0f64..3.0),
        v in proptest::array::uniform3(-3.0f64..3.0),
        w in proptest::array::uniform3(-5.0f64..5.0),
        tilt in 0.0f64..3.1,
        h in 0.0f64..1.0,
        q in proptest::array::uniform12(-3.0f64..3.0),
        t in proptest::array::uniform4(0.0f64..3.0),
        c in proptest::array::uniform4(any::<bool>()),
    ) {
        let zeros = [0.0; N_J];
        let x = RewardInputs {
            command: e, lin_vel: v, ang_vel: w, tilt, base_height: h, r_n: 0.3,
            q: &q, q_nominal: &zeros, qd: &q, qdd: &q, torques: &q,
            q_des: &q, q_des_prev: &zeros, q_des_prev2: &q,
            contacts: &c, foot_slip: &[[v[0], v[1]]; 4], t_swing: &t, collided: false,
        };
        let r = compute_reward(&x);
        for p in [r.orientation, r.height, r.base_motion, r.joint_pos, r.joint_vel, r.joint_acc,
                  r.torque, r.smooth1, r.smooth2, r.slip] {
            prop_assert!(p <= 0.0);
        }
        // tanh rounds to exactly 1 beyond an argument of about 19.
        let ev = 4.0 * ((e[0] - v[0]).powi(2) + (e[1] - v[1]).powi(2));
        let ew = 2.0 * (e[2] - w[2]).powi(2);
        prop_assert!(r.lin_vel >= 0.0 && r.lin_vel <= 3.0);
        prop_assert!(r.ang_vel >= 0.0 && r.ang_vel <= 1.75);
        if ev < 18.0 { prop_assert!(r.lin_vel > 0.0); }
        if ew < 18.0 { prop_assert!(r.ang_vel > 0.0); }
        prop_assert_eq!(r.total, r.sum_terms());
    }
}

fn standing_config() -> EnvConfig {
    let mut cfg = EnvConfig::default();
    cfg.commands.zero_probability = 1.0;
    cfg
}

#[test]
fn zero_action_targets_nominal_and_histories_shift() {
    let robot = a1();
    let mut env = Env::new(0, robot.clone(), EnvConfig::default(), 1);
    env.step(&[0.0; N_J]).unwrap();
    assert_eq!(env.episode().q_des_prev.to_vec(), robot.nominal);
    let actions: Vec<[f64; N_J]> = (1..=3).map(|k| [0.01 * k as f64; N_J]).collect();
    for a in &actions {
        env.step(a).unwrap();
    }
    let f = env.frame();
    let same = |a: &[f64; N_J], b: &[f64; N_J]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(same(&f.q_star, &actions[2]));
    assert!(same(&f.q_star_hist[0], &actions[1]));
    assert!(same(&f.q_star_hist[1], &actions[0]));
    assert!(env.step(&[0.0; 3]).is_err());
}

#[test]
fn stands_for_a_full_episode() {
    let mut env = Env::new(0, a1(), standing_config(), 2);
    let mut last = None;
    for k in 1..=600 {
        let r = env.step(&[0.0; N_J]).unwrap();
        assert_eq!(r.reward.total, r.reward.sum_terms());
        if r.done {
            last = Some((k, r.cause));
            break;
        }
    }
    assert_eq!(last, Some((600, Some(TerminationCause::Timeout))));
}

fn rollout(env: &mut Env, n: usize) -> Vec<StepResult> {
    (0..n)
        .map(|k| {
            let a: Vec<f64> = (0..N_J).map(|j| 0.05 * ((k + j) as f64 * 0.3).sin()).collect();
            env.step(&a).unwrap()
        })
        .collect()
}

#[test]
fn episodes_are_reproducible() {
    let robot = a1();
    let mut cfg = EnvConfig::default();
    cfg.push = Some(PushSchedule::with_force(40.0));
    let mut a = Env::new(3, robot.clone(), cfg.clone(), 9);
    let mut b = Env::new(3, robot.clone(), cfg.clone(), 9);
    assert_eq!(rollout(&mut a, 250), rollout(&mut b, 250));
    let mut c = Env::new(4, robot, cfg, 9);
    assert_ne!(c.frame(), Env::new(3, a1(), EnvConfig::default(), 9).frame());
    let _ = rollout(&mut c, 1);
}

#[test]
fn vector_env_is_permutation_equivariant() {
    let robots = vec![a1(), {
        let r = reference(4).unwrap();
        Arc::new(assemble_model(&r.defaults, &r).unwrap())
    }];
    let cfg = EnvConfig { max_steps: 30, ..Default::default() };
    let build = |order: &[usize]| {
        let envs = order
            .iter()
            .map(|&id| Env::new(id, robots[id % 2].clone(), cfg.clone(), 5))
            .collect();
        VecEnv::from_envs(envs, robots.clone()).unwrap()
    };
    let order = [2, 0, 3, 1];
    let mut fwd = build(&[0, 1, 2, 3]);
    let mut perm = build(&order);
    for k in 0..40 {
        let act = |id: usize| vec![0.02 * ((k * 7 + id) as f64).cos(); N_J];
        let ra = fwd.step_all(&(0..4).map(act).collect::<Vec<_>>()).unwrap();
        let rb = perm.step_all(&order.iter().map(|&id| act(id)).collect::<Vec<_>>()).unwrap();
        assert_eq!(ra.len(), 4);
        for (slot, &id) in order.iter().enumerate() {
            assert_eq!(rb[slot], ra[id], "step {k}, env {id}");
        }
    }
}

#[test]
fn robots_change_only_at_reset() {
    let a = a1();
    let b = {
        let r = reference(2).unwrap();
        Arc::new(assemble_model(&r.defaults, &r).unwrap())
    };
    let cfg = EnvConfig { max_steps: 5, ..standing_config() };
    let mut venv = VecEnv::new(vec![a.clone()], 2, &cfg, 1).unwrap();
    venv.set_robots(vec![b.clone()]).unwrap();
    for k in 1..=5 {
        let r = venv.step_all(&[vec![0.0; N_J], vec![0.0; N_J]]).unwrap();
        for (i, e) in venv.envs().iter().enumerate() {
            if k < 5 {
                assert!(Arc::ptr_eq(e.robot(), &a));
                assert!(!r[i].done);
            } else {
                assert!(r[i].done && r[i].terminal_frame.is_some());
                assert!(Arc::ptr_eq(e.robot(), &b));
                assert_eq!(e.episode().step, 0);
            }
        }
    }
    assert!(matches!(venv.set_robots(vec![]), Err(EnvError::NoRobots)));
}

#[test]
fn round_robin_assignment() {
    use pal_core::env::vector::assignment;
    assert_eq!(assignment(0, 0, 4, 10), 0);
    assert_eq!(assignment(3, 0, 4, 10), 3);
    assert_eq!(assignment(3, 1, 4, 10), 7);
    assert_eq!(assignment(3, 2, 4, 10), 1);
}

#[test]
fn episode_log_has_one_row_per_step() {
    let mut env = Env::new(0, a1(), EnvConfig::default(), 4);
    let mut buf = Vec::new();
    {
        let mut log = EpisodeLogger::new(&mut buf).unwrap();
        for (k, r) in rollout(&mut env, 5).iter().enumerate() {
            log.record(0, k, r).unwrap();
        }
        log.flush().unwrap();
    }
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("env,step,cmd_vx"));
    assert!(lines[0].ends_with("done,cause"));
    let cols = lines[0].split(',').count();
    assert!(lines[1..].iter().all(|l| l.split(',').count() == cols));
}

#[test]
fn snapshot_resumes_bit_for_bit() {
    let mut cfg = EnvConfig::default();
    cfg.push = Some(PushSchedule::with_force(30.0));
    let mut a = Env::new(2, a1(), cfg.clone(), 11);
    let _ = rollout(&mut a, 137);
    let snap = a.snapshot();
    let json = serde_json::to_string(&snap).unwrap();
    let mut b = Env::restore(serde_json::from_str(&json).unwrap(), cfg).unwrap();
    assert_eq!(b.frame(), a.frame());
    assert_eq!(rollout(&mut a, 300), rollout(&mut b, 300));
}
