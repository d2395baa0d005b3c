//! Offline supervised training of the dynamics encoder: regress the robot's
//! normalized label from the hidden state at every step of an episode,
//! backpropagating through windows of the sequence.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{DimDataset, Sequence};
use super::nets::DimNet;
use super::{DimError, LABEL_DIM};
use crate::env::{LATENT_DIM, X_DIM};
use crate::nn::{clip_global_norm, zeros_like, Adam, AdamConfig, Mat, Params};
use crate::seeding::{rng_for, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimTrainConfig {
    pub epochs: usize,
    pub window: usize,
    /// Sequences per batch (processed side by side as columns).
    pub batch_sequences: usize,
    pub lr: f64,
    pub max_grad_norm: f64,
    pub heldout_fraction: f64,
}

impl Default for DimTrainConfig {
    fn default() -> Self {
        Self { epochs: 20, window: 50, batch_sequences: 16, lr: 1e-3, max_grad_norm: 1.0, heldout_fraction: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimTrainReport {
    pub epochs: Vec<DimEpoch>,
    /// Loss of predicting the training-set mean label on the held-out split.
    pub heldout_baseline: Option<f64>,
    pub train_sequences: usize,
    pub heldout_sequences: usize,
}

fn label_mat(ds: &DimDataset, seqs: &[&Sequence]) -> Mat {
    let mut y = Mat::zeros(LABEL_DIM, seqs.len());
    for (j, s) in seqs.iter().enumerate() {
        y.column_mut(j).copy_from_slice(&ds.labels[s.label]);
    }
    y
}

fn step_input(seqs: &[&Sequence], t: usize) -> (Mat, Vec<bool>) {
    let mut x = Mat::zeros(X_DIM, seqs.len());
    let mut valid = vec![false; seqs.len()];
    for (j, s) in seqs.iter().enumerate() {
        if t < s.len() {
            x.column_mut(j).copy_from_slice(s.row(t));
            valid[j] = true;
        }
    }
    (x, valid)
}

/// Per-step label predictions along one sequence from a zero hidden state.
pub fn predict_sequence(net: &DimNet, seq: &Sequence) -> Result<Vec<Vec<f64>>, DimError> {
    let mut h = Mat::zeros(LATENT_DIM, 1);
    let mut out = Vec::with_capacity(seq.len());
    for t in 0..seq.len() {
        let x = Mat::from_column_slice(X_DIM, 1, seq.row(t));
        let (h1, pred) = net.forward(&x, &h)?;
        out.push(pred.as_slice().to_vec());
        h = h1;
    }
    Ok(out)
}

/// Mean squared label error over every step of every sequence.
pub fn dataset_loss(net: &DimNet, ds: &DimDataset) -> Result<f64, DimError> {
    let (mut sum, mut n) = (0.0, 0usize);
    for s in &ds.sequences {
        let y = &ds.labels[s.label];
        for p in predict_sequence(net, s)? {
            sum += p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            n += LABEL_DIM;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Step-weighted mean label of `ds`.
pub fn mean_label(ds: &DimDataset) -> Vec<f64> {
    let mut m = vec![0.0; LABEL_DIM];
    let total = ds.n_transitions().max(1) as f64;
    for s in &ds.sequences {
        let w = s.len() as f64 / total;
        for (mi, y) in m.iter_mut().zip(&ds.labels[s.label]) {
            *mi += w * y;
        }
    }
    m
}

/// Loss of always predicting `mean` on `ds`, weighted like [`dataset_loss`].
pub fn mean_label_loss(mean: &[f64], ds: &DimDataset) -> f64 {
    let total = ds.n_transitions();
    if total == 0 {
        return 0.0;
    }
    let sum: f64 = ds
        .sequences
        .iter()
        .map(|s| s.len() as f64 * ds.labels[s.label].iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    sum / (total * LABEL_DIM) as f64
}

/// One pass over `seqs` in windows; returns the summed squared error and entry count.
fn train_batch(
    net: &mut DimNet,
    adam: &mut Adam,
    ds: &DimDataset,
    seqs: &[&Sequence],
    cfg: &DimTrainConfig,
) -> Result<(f64, usize), DimError> {
    let y = label_mat(ds, seqs);
    let max_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut h = Mat::zeros(LATENT_DIM, seqs.len());
    let (mut sum, mut count) = (0.0, 0usize);
    let mut start = 0;
    while start < max_len {
        let end = (start + cfg.window).min(max_len);
        let mut xs = Vec::with_capacity(end - start);
        let mut masks = Vec::with_capacity(end - start);
        for t in start..end {
            let (x, valid) = step_input(seqs, t);
            xs.push(x);
            masks.push(valid);
        }
        let trace = net.gru.forward_seq(&xs, &h, None)?;
        let n_valid: usize = masks.iter().map(|m| m.iter().filter(|&&v| v).count()).sum();
        let scale = 2.0 / (n_valid * LABEL_DIM) as f64;
        let mut grads = zeros_like(net);
        let mut grad_hs = Vec::with_capacity(xs.len());
        for (hs, mask) in trace.hs.iter().zip(&masks) {
            let cache = net.readout.forward(hs)?;
            let mut r = &cache.output - &y;
            for (j, &v) in mask.iter().enumerate() {
                if !v {
                    r.column_mut(j).fill(0.0);
                }
            }
            sum += r.norm_squared();
            let (g_ro, g_h) = net.readout.backward(&cache, &(r * scale));
            grads.readout.axpy(1.0, &g_ro);
            grad_hs.push(g_h);
        }
        count += n_valid * LABEL_DIM;
        let (g_gru, _) = net.gru.backward_seq(&trace, &grad_hs)?;
        grads.gru = g_gru;
        clip_global_norm(&mut [&mut grads], cfg.max_grad_norm);
        adam.step(net, &grads, cfg.lr)?;
        h = trace.hs.last().expect("non-empty window").clone();
        start = end;
    }
    Ok((sum, count))
}

/// Trains `net` in place. The held-out split is taken by robot label so the
/// held-out loss measures generalization to unseen robots.
pub fn train_offline(net: &mut DimNet, ds: &DimDataset, cfg: &DimTrainConfig, seed: u64) -> Result<DimTrainReport, DimError> {
    if ds.sequences.is_empty() {
        return Err(DimError::Dataset("empty dataset".into()));
    }
    let (train, held) = ds.split(cfg.heldout_fraction);
    if train.sequences.is_empty() {
        return Err(DimError::Dataset("held-out split left no training data".into()));
    }
    let has_held = !held.sequences.is_empty();
    let baseline = has_held.then(|| mean_label_loss(&mean_label(&train), &held));
    let mut adam = Adam::new(net, AdamConfig::default());
    let mut rng = rng_for(seed, &[tag("dim_train")]);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.sequences.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_sequences.max(1)) {
            let seqs: Vec<&Sequence> = chunk.iter().map(|&i| &train.sequences[i]).collect();
            let (s, c) = train_batch(net, &mut adam, &train, &seqs, cfg)?;
            sum += s;
            count += c;
        }
        let train_loss = sum / count.max(1) as f64;
        if !train_loss.is_finite() || !net.is_finite() {
            return Err(DimError::Diverged(epoch));
        }
        let heldout_loss = if has_held { Some(dataset_loss(net, &held)?) } else { None };
        log::debug!("dim epoch {epoch}: train {train_loss:.5} heldout {heldout_loss:?}");
        epochs.push(DimEpoch { epoch, train_loss, heldout_loss });
    }
    Ok(DimTrainReport {
        epochs,
        heldout_baseline: baseline,
        train_sequences: train.sequences.len(),
        heldout_sequences: held.sequences.len(),
    })
}
