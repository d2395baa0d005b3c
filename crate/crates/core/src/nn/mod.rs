//! Small dense networks in double precision: MLPs, a GRU cell with truncated
//! backpropagation through time, a diagonal Gaussian head and Adam.
//!
//! Batches are column-major: a `(features × batch)` matrix holds one sample
//! per column.

pub mod adam;
pub mod checkpoint;
pub mod gaussian;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod mlp;

use nalgebra::DMatrix;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, ModuleRecord};
pub use gaussian::GaussianHead;
pub use gru::{Gru, GruTrace};
pub use mlp::{Mlp, MlpCache};

pub type Mat = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("state: {0}")]
    State(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub(crate) fn expect_rows(m: &Mat, rows: usize, what: &str) -> Result<(), NnError> {
    if m.nrows() != rows {
        return Err(NnError::Shape(format!("{what}: {} rows, expected {rows}", m.nrows())));
    }
    Ok(())
}

/// A fixed, ordered list of parameter tensors.
pub trait Params {
    fn tensors(&self) -> Vec<&Mat>;
    fn tensors_mut(&mut self) -> Vec<&mut Mat>;

    fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn shapes(&self) -> Vec<[usize; 2]> {
        self.tensors().iter().map(|t| [t.nrows(), t.ncols()]).collect()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for t in self.tensors() {
            out.extend_from_slice(t.as_slice());
        }
        out
    }

    fn set_flat(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.n_params() {
            return Err(NnError::Shape(format!("{} values for {} parameters", flat.len(), self.n_params())));
        }
        let mut at = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    fn fill(&mut self, v: f64) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }

    /// `self += scale · other`, tensor by tensor.
    fn axpy(&mut self, scale: f64, other: &Self)
    where
        Self: Sized,
    {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b * scale;
        }
    }

    fn sq_norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.norm_squared()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// A copy of `p` with every entry zero, for gradient accumulation.
pub fn zeros_like<P: Params + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.fill(0.0);
    z
}

/// Scales all tensors of `grads` together so their joint norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut dyn ParamsDyn], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.sq_norm_dyn()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_dyn(s);
        }
    }
    norm
}

/// Object-safe view used where several gradient sets are handled together.
pub trait ParamsDyn {
    fn sq_norm_dyn(&self) -> f64;
    fn scale_dyn(&mut self, s: f64);
}

impl<P: Params> ParamsDyn for P {
    fn sq_norm_dyn(&self) -> f64 {
        self.sq_norm()
    }

    fn scale_dyn(&mut self, s: f64) {
        for t in self.tensors_mut() {
            *t *= s;
        }
    }
}

pub(crate) fn add_bias(z: &mut Mat, b: &Mat) {
    let bc = b.column(0);
    for mut col in z.column_iter_mut() {
        col += bc;
    }
}

pub(crate) fn row_sums(g: &Mat) -> Mat {
    let s = g.column_sum();
    Mat::from_column_slice(g.nrows(), 1, s.as_slice())
}
