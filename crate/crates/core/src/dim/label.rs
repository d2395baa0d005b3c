//! Normalized ground-truth dynamics labels.
//!
//! Layout (61): base mass, 12 link masses, 36 joint offsets (12 joints ×
//! xyz, unsigned as stored), 4 foot offsets, Kp, Kd, τ_max, 4 foot friction
//! coefficients, latency. Each entry is mapped to [−1, 1] by fixed bounds
//! taken as the union of every supported reference table, so labels mean
//! the same thing whatever reference set a run trains on.

use crate::morphology::{reference, Bounds, MorphologyParams, N_JOINTS, N_LEGS, SUPPORTED_IDS};

pub const LABEL_DIM: usize = 61;

#[derive(Clone, Debug, PartialEq)]
pub struct LabelSpace {
    pub bounds: Vec<Bounds>,
}

fn union(a: Bounds, b: Bounds) -> Bounds {
    Bounds::new(a.lo.min(b.lo), a.hi.max(b.hi))
}

impl LabelSpace {
    /// Union bounds over the given references; `latency` is the sampling range.
    pub fn from_refs(ids: &[u32], latency: Bounds) -> Self {
        let tables: Vec<_> = ids.iter().filter_map(|&id| reference(id).ok()).map(|r| r.sampling_table).collect();
        let fold = |f: &dyn Fn(&crate::morphology::SamplingTable) -> Bounds| {
            tables.iter().map(f).reduce(union).expect("at least one reference")
        };
        let mut b = Vec::with_capacity(LABEL_DIM);
        b.push(fold(&|t| t.m_base));
        for j in 0..N_JOINTS {
            b.push(match j % 3 {
                0 => fold(&|t| t.m_hip),
                1 => fold(&|t| t.m_thigh),
                _ => fold(&|t| t.m_shank),
            });
        }
        for j in 0..N_JOINTS {
            for a in 0..3 {
                b.push(match j % 3 {
                    0 => fold(&|t| t.c_q1[a]),
                    1 => fold(&|t| t.c_q2[a]),
                    _ => fold(&|t| t.c_q3[a]),
                });
            }
        }
        for _ in 0..N_LEGS {
            b.push(fold(&|t| t.c_fz));
        }
        b.push(fold(&|t| t.kp));
        b.push(fold(&|t| t.kd));
        b.push(fold(&|t| t.tau_max));
        for _ in 0..N_LEGS {
            b.push(fold(&|t| t.mu_f));
        }
        b.push(latency);
        debug_assert_eq!(b.len(), LABEL_DIM);
        Self { bounds: b }
    }

    pub fn all_references(latency: Bounds) -> Self {
        Self::from_refs(&SUPPORTED_IDS, latency)
    }

    pub fn raw(p: &MorphologyParams) -> Vec<f64> {
        let mut v = Vec::with_capacity(LABEL_DIM);
        v.push(p.base_mass);
        v.extend_from_slice(&p.link_masses);
        for o in &p.joint_offsets {
            v.extend_from_slice(o);
        }
        v.extend_from_slice(&p.foot_offsets);
        v.extend([p.kp, p.kd, p.tau_max]);
        v.extend_from_slice(&p.friction);
        v.push(p.latency);
        v
    }

    pub fn normalize_raw(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.bounds)
            .map(|(&x, b)| if b.hi > b.lo { 2.0 * (x - b.lo) / (b.hi - b.lo) - 1.0 } else { 0.0 })
            .collect()
    }

    pub fn denormalize(&self, label: &[f64]) -> Vec<f64> {
        label
            .iter()
            .zip(&self.bounds)
            .map(|(&y, b)| if b.hi > b.lo { b.lo + (y + 1.0) * 0.5 * (b.hi - b.lo) } else { b.lo })
            .collect()
    }

    pub fn label(&self, p: &MorphologyParams) -> Vec<f64> {
        self.normalize_raw(&Self::raw(p))
    }
}
