//! Parameter initialization.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Mat;

/// Uniform in `±sqrt(6 / fan_in)` scaled by `gain`.
pub fn fan_in_uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, gain: f64) -> Mat {
    let bound = gain * (6.0 / cols.max(1) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

/// Square orthogonal matrix from the QR factor of a Gaussian draw, with the
/// sign convention that makes the distribution uniform.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
