//! Gated recurrent unit with truncated backpropagation through time.
//!
//! `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
//! `ĥ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ ĥ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::{fan_in_uniform, orthogonal};
use super::{add_bias, expect_rows, row_sums, Mat, NnError, Params};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub wz: Mat,
    pub uz: Mat,
    pub bz: Mat,
    pub wr: Mat,
    pub ur: Mat,
    pub br: Mat,
    pub wh: Mat,
    pub uh: Mat,
    pub bh: Mat,
}

#[derive(Clone, Debug)]
pub struct GruStepCache {
    pub x: Mat,
    /// Hidden state entering the step, after episode-start resets.
    pub h: Mat,
    pub z: Mat,
    pub r: Mat,
    pub cand: Mat,
    /// Columns whose incoming hidden state was zeroed.
    pub reset: Vec<bool>,
}

/// A forward pass over a window, kept for [`Gru::backward_seq`].
#[derive(Clone, Debug)]
pub struct GruTrace {
    pub steps: Vec<GruStepCache>,
    /// Output hidden state of every step.
    pub hs: Vec<Mat>,
}

impl Gru {
    /// Fan-in uniform input weights, orthogonal recurrent weights, zero biases.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut w = || fan_in_uniform(rng, hidden, input, 1.0);
        let (wz, wr, wh) = (w(), w(), w());
        Self {
            wz,
            wr,
            wh,
            uz: orthogonal(rng, hidden),
            ur: orthogonal(rng, hidden),
            uh: orthogonal(rng, hidden),
            bz: Mat::zeros(hidden, 1),
            br: Mat::zeros(hidden, 1),
            bh: Mat::zeros(hidden, 1),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        let (w, u, b) = (Mat::zeros(hidden, input), Mat::zeros(hidden, hidden), Mat::zeros(hidden, 1));
        Self {
            wz: w.clone(),
            uz: u.clone(),
            bz: b.clone(),
            wr: w.clone(),
            ur: u.clone(),
            br: b.clone(),
            wh: w,
            uh: u,
            bh: b,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.wz.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.uz.nrows()
    }

    fn gate(&self, w: &Mat, u: &Mat, b: &Mat, x: &Mat, h: &Mat) -> Mat {
        let mut a = w * x + u * h;
        add_bias(&mut a, b);
        a
    }

    /// One step. Columns flagged in `reset` start from a zero hidden state.
    pub fn step_cached(&self, x: &Mat, h: &Mat, reset: Option<&[bool]>) -> Result<(Mat, GruStepCache), NnError> {
        expect_rows(x, self.input_dim(), "gru input")?;
        expect_rows(h, self.hidden_dim(), "gru hidden")?;
        if x.ncols() != h.ncols() {
            return Err(NnError::Shape(format!("gru batch {} vs hidden batch {}", x.ncols(), h.ncols())));
        }
        let mut h = h.clone();
        let reset = match reset {
            Some(r) => {
                if r.len() != h.ncols() {
                    return Err(NnError::Shape(format!("{} reset flags for batch {}", r.len(), h.ncols())));
                }
                for (j, &flag) in r.iter().enumerate() {
                    if flag {
                        h.column_mut(j).fill(0.0);
                    }
                }
                r.to_vec()
            }
            None => vec![false; h.ncols()],
        };
        let z = self.gate(&self.wz, &self.uz, &self.bz, x, &h).map(sigmoid);
        let r = self.gate(&self.wr, &self.ur, &self.br, x, &h).map(sigmoid);
        let rh = r.component_mul(&h);
        let cand = self.gate(&self.wh, &self.uh, &self.bh, x, &rh).map(f64::tanh);
        let mut out = h.clone();
        out.zip_zip_apply(&z, &cand, |o, zv, c| *o = (1.0 - zv) * *o + zv * c);
        Ok((out, GruStepCache { x: x.clone(), h, z, r, cand, reset }))
    }

    pub fn step(&self, x: &Mat, h: &Mat) -> Result<Mat, NnError> {
        Ok(self.step_cached(x, h, None)?.0)
    }

    /// Runs a window from `h0`. `resets[t]` marks columns whose episode starts at step `t`.
    pub fn forward_seq(&self, xs: &[Mat], h0: &Mat, resets: Option<&[Vec<bool>]>) -> Result<GruTrace, NnError> {
        if let Some(r) = resets {
            if r.len() != xs.len() {
                return Err(NnError::State(format!("{} reset rows for {} steps", r.len(), xs.len())));
            }
        }
        let mut h = h0.clone();
        let mut steps = Vec::with_capacity(xs.len());
        let mut hs = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            let (next, cache) = self.step_cached(x, &h, resets.map(|r| r[t].as_slice()))?;
            steps.push(cache);
            hs.push(next.clone());
            h = next;
        }
        Ok(GruTrace { steps, hs })
    }

    /// Backpropagates `grad_hs[t] = ∂L/∂h_t` (direct terms only) through the
    /// window. Returns parameter gradients and `∂L/∂h0`; the caller drops the
    /// latter at a truncation boundary.
    pub fn backward_seq(&self, trace: &GruTrace, grad_hs: &[Mat]) -> Result<(Gru, Mat), NnError> {
        if grad_hs.len() != trace.steps.len() {
            return Err(NnError::State(format!("{} upstream grads for a {}-step window", grad_hs.len(), trace.steps.len())));
        }
        let mut g = Gru::zeros(self.input_dim(), self.hidden_dim());
        let Some(first) = trace.steps.first() else {
            return Ok((g, Mat::zeros(self.hidden_dim(), 0)));
        };
        let mut carry = Mat::zeros(self.hidden_dim(), first.x.ncols());
        for t in (0..trace.steps.len()).rev() {
            let c = &trace.steps[t];
            let dh = &grad_hs[t] + &carry;
            // h' = (1 − z) h + z ĥ
            let dz = dh.component_mul(&(&c.cand - &c.h));
            let dcand = dh.component_mul(&c.z);
            let mut dh_prev = dh.component_mul(&c.z.map(|z| 1.0 - z));

            let da_h = dcand.zip_map(&c.cand, |d, y| d * (1.0 - y * y));
            let rh = c.r.component_mul(&c.h);
            g.wh += &da_h * c.x.transpose();
            g.uh += &da_h * rh.transpose();
            g.bh += row_sums(&da_h);
            let drh = self.uh.transpose() * &da_h;
            let dr = drh.component_mul(&c.h);
            dh_prev += drh.component_mul(&c.r);

            let da_z = dz.zip_map(&c.z, |d, s| d * s * (1.0 - s));
            g.wz += &da_z * c.x.transpose();
            g.uz += &da_z * c.h.transpose();
            g.bz += row_sums(&da_z);
            dh_prev += self.uz.transpose() * &da_z;

            let da_r = dr.zip_map(&c.r, |d, s| d * s * (1.0 - s));
            g.wr += &da_r * c.x.transpose();
            g.ur += &da_r * c.h.transpose();
            g.br += row_sums(&da_r);
            dh_prev += self.ur.transpose() * &da_r;

            for (j, &flag) in c.reset.iter().enumerate() {
                if flag {
                    dh_prev.column_mut(j).fill(0.0);
                }
            }
            carry = dh_prev;
        }
        Ok((g, carry))
    }
}

impl Params for Gru {
    fn tensors(&self) -> Vec<&Mat> {
        vec![&self.wz, &self.uz, &self.bz, &self.wr, &self.ur, &self.br, &self.wh, &self.uh, &self.bh]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        vec![
            &mut self.wz,
            &mut self.uz,
            &mut self.bz,
            &mut self.wr,
            &mut self.ur,
            &mut self.br,
            &mut self.wh,
            &mut self.uh,
            &mut self.bh,
        ]
    }
}
