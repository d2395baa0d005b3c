//! Offline DIM training data: per-episode `x_t` sequences, each tied to the
//! label of the robot that produced it.
//!
//! File layout: the 8-byte magic `PALDIM01`, a little-endian u64 header
//! length, a JSON header (dimensions, label table, sequence index), then all
//! `x_t` rows as little-endian f64 in sequence order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::label::LABEL_DIM;
use super::DimError;
use crate::env::X_DIM;

pub const MAGIC: &[u8; 8] = b"PALDIM01";
const MAX_HEADER: u64 = 1 << 30;

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    /// Index into [`DimDataset::labels`].
    pub label: usize,
    /// Row-major `len × X_DIM`.
    pub xs: Vec<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.xs.len() / X_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.xs[t * X_DIM..(t + 1) * X_DIM]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DimDataset {
    pub labels: Vec<Vec<f64>>,
    pub sequences: Vec<Sequence>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    x_dim: usize,
    label_dim: usize,
    labels: Vec<Vec<f64>>,
    /// `(label index, row count)` per sequence.
    sequences: Vec<(usize, u64)>,
}

impl DimDataset {
    pub fn n_transitions(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    /// Index of `label` in the table, appending it if new.
    pub fn intern_label(&mut self, label: &[f64]) -> usize {
        if let Some(i) = self.labels.iter().position(|l| l.as_slice() == label) {
            return i;
        }
        self.labels.push(label.to_vec());
        self.labels.len() - 1
    }

    pub fn push(&mut self, label: &[f64], xs: Vec<f64>) {
        if xs.is_empty() {
            return;
        }
        let label = self.intern_label(label);
        self.sequences.push(Sequence { label, xs });
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            x_dim: X_DIM,
            label_dim: LABEL_DIM,
            labels: self.labels.clone(),
            sequences: self.sequences.iter().map(|s| (s.label, s.len() as u64)).collect(),
        };
        let h = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + h.len() + 8 * self.n_transitions() * X_DIM);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(h.len() as u64).to_le_bytes());
        out.extend_from_slice(&h);
        for s in &self.sequences {
            for v in &s.xs {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DimError> {
        let bad = |m: &str| DimError::Dataset(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        if hlen > MAX_HEADER || hlen > (bytes.len() - 16) as u64 {
            return Err(bad("header length out of range"));
        }
        let body_at = 16 + hlen as usize;
        let header: Header = serde_json::from_slice(&bytes[16..body_at]).map_err(|e| DimError::Dataset(e.to_string()))?;
        if header.x_dim != X_DIM || header.label_dim != LABEL_DIM {
            return Err(bad("dimension mismatch"));
        }
        for l in &header.labels {
            if l.len() != LABEL_DIM || l.iter().any(|v| !v.is_finite()) {
                return Err(bad("malformed label"));
            }
        }
        let body = &bytes[body_at..];
        let mut rows: u64 = 0;
        for &(label, n) in &header.sequences {
            if label >= header.labels.len() || n == 0 {
                return Err(bad("bad sequence entry"));
            }
            rows = rows.checked_add(n).ok_or_else(|| bad("row count overflow"))?;
        }
        let expected = rows.checked_mul((X_DIM * 8) as u64).ok_or_else(|| bad("row count overflow"))?;
        if expected != body.len() as u64 {
            return Err(bad("body length does not match the sequence index"));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut sequences = Vec::with_capacity(header.sequences.len());
        for &(label, n) in &header.sequences {
            let xs: Vec<f64> = values.by_ref().take(n as usize * X_DIM).collect();
            if xs.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite observation"));
            }
            sequences.push(Sequence { label, xs });
        }
        Ok(Self { labels: header.labels, sequences })
    }

    pub fn save(&self, path: &Path) -> Result<(), DimError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| DimError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, DimError> {
        let bytes = std::fs::read(path).map_err(|e| DimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Splits by label: labels whose index hashes into the held-out share go
    /// to the second set. With a single label, sequences are split instead.
    pub fn split(&self, heldout_fraction: f64) -> (DimDataset, DimDataset) {
        let mut train = DimDataset { labels: self.labels.clone(), sequences: Vec::new() };
        let mut held = train.clone();
        if heldout_fraction <= 0.0 {
            train.sequences = self.sequences.clone();
            return (train, held);
        }
        let every = (1.0 / heldout_fraction).round().max(2.0) as usize;
        let by_label = self.labels.len() > 1;
        for (i, s) in self.sequences.iter().enumerate() {
            let key = if by_label { s.label } else { i };
            if key % every == every - 1 {
                held.sequences.push(s.clone());
            } else {
                train.sequences.push(s.clone());
            }
        }
        (train, held)
    }
}

/// Splits per-env `x_t` streams into episode sequences as a rollout runs.
#[derive(Clone, Debug)]
pub struct SequenceRecorder {
    open: Vec<(Vec<f64>, Vec<f64>)>,
    pub dataset: DimDataset,
}

impl SequenceRecorder {
    pub fn new(n_env: usize) -> Self {
        Self { open: vec![(Vec::new(), Vec::new()); n_env], dataset: DimDataset::default() }
    }

    /// Appends `x` to env `env`'s open sequence. `label` belongs to the robot
    /// that produced `x`; `done` closes the sequence after this step.
    pub fn record(&mut self, env: usize, x: &[f64], label: &[f64], done: bool) {
        let (xs, l) = &mut self.open[env];
        if xs.is_empty() {
            *l = label.to_vec();
        }
        debug_assert_eq!(l.as_slice(), label, "robot changed inside an episode");
        xs.extend_from_slice(x);
        if done {
            let (xs, l) = std::mem::take(&mut self.open[env]);
            self.dataset.push(&l, xs);
        }
    }

    pub fn transitions(&self) -> usize {
        self.dataset.n_transitions() + self.open.iter().map(|(xs, _)| xs.len() / X_DIM).sum::<usize>()
    }

    /// Closes every open sequence (truncated episodes are kept).
    pub fn finish(mut self) -> DimDataset {
        for (xs, l) in std::mem::take(&mut self.open) {
            self.dataset.push(&l, xs);
        }
        self.dataset
    }
}
