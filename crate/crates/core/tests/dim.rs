use std::sync::Arc;

use pal_core::dim::*;
use pal_core::env::{EnvConfig, ObsScales, VecEnv, LATENT_DIM, X_DIM};
use pal_core::morphology::*;
use pal_core::nn::Mat;
use pal_core::seeding::rng_for;
use proptest::prelude::*;
use rand::Rng;

fn space() -> LabelSpace {
    LabelSpace::all_references(SamplingOptions::default().latency)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn labels_are_bounded_and_invertible(seed in any::<u64>(), idx in 0usize..4) {
        let id = SUPPORTED_IDS[idx];
        let r = reference(id).unwrap();
        let p = sample_morphology(&r, &mut rng_for(seed, &[]), &SamplingOptions::default());
        let s = space();
        let raw = LabelSpace::raw(&p);
        let y = s.label(&p);
        prop_assert_eq!(y.len(), LABEL_DIM);
        for v in &y {
            prop_assert!((-1.0..=1.0).contains(v), "label entry {}", v);
        }
        for (a, b) in s.denormalize(&y).iter().zip(&raw) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{} vs {}", a, b);
        }
    }
}

#[test]
fn zero_net_keeps_latent_at_zero() {
    let net = DimNet::zeros();
    let mut rng = rng_for(1, &[]);
    let mut h = Mat::zeros(LATENT_DIM, 1);
    for _ in 0..20 {
        let x = Mat::from_fn(X_DIM, 1, |_, _| rng.random_range(-3.0..3.0));
        let (h1, pred) = net.forward(&x, &h).unwrap();
        assert!(h1.iter().all(|&v| v == 0.0));
        assert!(pred.iter().all(|&v| v == 0.0));
        h = h1;
    }
}

/// Robots described by three hidden factors: the label and the observations
/// are fixed linear images of them, plus observation noise.
fn toy_dataset(n_robots: usize, per_robot: usize, len: usize, noise: f64, seed: u64) -> DimDataset {
    let mut rng = rng_for(seed, &[]);
    let to_label = Mat::from_fn(LABEL_DIM, 3, |_, _| rng.random_range(-0.33..0.33));
    let to_x = Mat::from_fn(X_DIM, 3, |_, _| rng.random_range(-1.0..1.0));
    let mut ds = DimDataset::default();
    for _ in 0..n_robots {
        let z = Mat::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
        let label: Vec<f64> = (&to_label * &z).iter().copied().collect();
        let clean = &to_x * &z;
        for _ in 0..per_robot {
            let mut xs = Vec::with_capacity(len * X_DIM);
            for _ in 0..len {
                xs.extend(clean.iter().map(|v| v + noise * rng.random_range(-1.0..1.0)));
            }
            ds.push(&label, xs);
        }
    }
    ds
}

#[test]
fn dataset_round_trips_and_rejects_corruption() {
    let ds = toy_dataset(3, 2, 7, 0.05, 4);
    let bytes = ds.to_bytes();
    assert_eq!(&bytes[..8], b"PALDIM01");
    assert_eq!(DimDataset::from_bytes(&bytes).unwrap(), ds);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    ds.save(&path).unwrap();
    assert_eq!(DimDataset::load(&path).unwrap(), ds);

    assert!(DimDataset::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut extra = bytes.clone();
    extra.extend_from_slice(&[0; 8]);
    assert!(DimDataset::from_bytes(&extra).is_err());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(DimDataset::from_bytes(&magic).is_err());
    let mut hlen = bytes.clone();
    hlen[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(DimDataset::from_bytes(&hlen).is_err());
    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(DimDataset::from_bytes(&nan).is_err());
}

#[test]
fn recorder_gives_one_label_per_sequence_and_covers_the_set() {
    let cfg = GenerationConfig::default();
    let (set, _) = generate_robot_set(&[1], 2, 3, &cfg).unwrap();
    let robots: Vec<_> = set.build_all().unwrap().into_iter().map(Arc::new).collect();
    let env_cfg = EnvConfig { max_steps: 100, ..EnvConfig::default() };
    let mut venv = VecEnv::new(robots.clone(), 2, &env_cfg, 5).unwrap();
    let s = space();
    let sc = ObsScales::default();
    let mut rec = SequenceRecorder::new(venv.len());
    let zero = vec![vec![0.0; 12]; venv.len()];
    // Short episodes, so cover the set with 100 steps per robot.
    while rec.transitions() < 100 * robots.len() * 2 {
        let frames = venv.frames();
        let labels: Vec<_> = venv.envs().iter().map(|e| s.label(&e.robot().params)).collect();
        let out = venv.step_all(&zero).unwrap();
        for (i, r) in out.iter().enumerate() {
            rec.record(i, &frames[i].x_t(&frames[i].lin_vel, &sc), &labels[i], r.done);
        }
    }
    let ds = rec.finish();
    let want: Vec<_> = robots.iter().map(|r| s.label(&r.params)).collect();
    for w in &want {
        assert!(ds.labels.contains(w), "robot missing from dataset");
    }
    assert_eq!(ds.labels.len(), robots.len());
    assert!(ds.sequences.iter().all(|q| q.len() <= 100));
}

#[test]
fn toy_training_loss_decreases() {
    let ds = toy_dataset(2, 4, 60, 0.05, 8);
    let cfg = DimTrainConfig { epochs: 5, heldout_fraction: 0.0, batch_sequences: 4, lr: 3e-3, ..DimTrainConfig::default() };
    let mut net = DimNet::new(&mut rng_for(2, &[]));
    let rep = train_offline(&mut net, &ds, &cfg, 0).unwrap();
    let l: Vec<f64> = rep.epochs.iter().map(|e| e.train_loss).collect();
    assert!(l.windows(2).all(|w| w[1] < w[0]), "losses {l:?}");
}

#[test]
fn trained_net_beats_mean_predictor_on_heldout_robots() {
    let ds = toy_dataset(16, 2, 40, 0.05, 9);
    let cfg = DimTrainConfig { epochs: 30, heldout_fraction: 0.25, batch_sequences: 8, lr: 3e-3, ..DimTrainConfig::default() };
    let mut net = DimNet::new(&mut rng_for(3, &[]));
    let rep = train_offline(&mut net, &ds, &cfg, 1).unwrap();
    assert!(rep.heldout_sequences > 0);
    let held = rep.epochs.last().unwrap().heldout_loss.unwrap();
    let base = rep.heldout_baseline.unwrap();
    assert!(held < base, "held-out {held} vs mean predictor {base}");
}

#[test]
fn single_robot_label_is_recovered() {
    let ds = toy_dataset(1, 8, 30, 0.05, 10);
    let cfg = DimTrainConfig { epochs: 60, heldout_fraction: 0.25, batch_sequences: 8, lr: 1e-2, ..DimTrainConfig::default() };
    let mut net = DimNet::new(&mut rng_for(4, &[]));
    let rep = train_offline(&mut net, &ds, &cfg, 2).unwrap();
    let (_, held) = ds.split(0.25);
    let y = &ds.labels[0];
    let preds = predict_sequence(&net, &held.sequences[0]).unwrap();
    let last = preds.last().unwrap();
    let err = (last.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / LABEL_DIM as f64).sqrt();
    assert!(err < 0.05, "rms label error {err}, report {:?}", rep.epochs.last());
    // On a long noise-free rollout of the same robot, predictions settle.
    let still = Sequence { label: 0, xs: held.sequences[0].row(0).repeat(200) };
    let preds = predict_sequence(&net, &still).unwrap();
    let d: f64 = preds[198].iter().zip(&preds[199]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    assert!(d < 1e-3, "prediction still moving by {d}");
}

#[test]
fn mean_predictor_loss_is_label_variance() {
    let mut ds = DimDataset::default();
    let a = vec![0.5; LABEL_DIM];
    let b = vec![-0.5; LABEL_DIM];
    ds.push(&a, vec![0.0; 3 * X_DIM]);
    ds.push(&b, vec![0.0; 3 * X_DIM]);
    let m = mean_label(&ds);
    assert!(m.iter().all(|&v| v.abs() < 1e-15));
    assert!((mean_label_loss(&m, &ds) - 0.25).abs() < 1e-15);
    assert!((dataset_loss(&DimNet::zeros(), &ds).unwrap() - 0.25).abs() < 1e-15);
}
