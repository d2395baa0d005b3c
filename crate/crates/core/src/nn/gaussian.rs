//! Diagonal Gaussian action distribution around a network mean.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Mat, Params};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    /// `(dim × 1)` log standard deviations.
    pub log_std: Mat,
    /// When false the standard deviation is a constant and receives no gradient.
    pub learn_std: bool,
}

impl GaussianHead {
    pub fn new(dim: usize, std: f64, learn_std: bool) -> Self {
        Self { log_std: Mat::from_element(dim, 1, std.ln()), learn_std }
    }

    pub fn dim(&self) -> usize {
        self.log_std.nrows()
    }

    pub fn std(&self, i: usize) -> f64 {
        self.log_std[(i, 0)].exp()
    }

    /// `mean + σ ⊙ ξ` per column.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &Mat, rng: &mut R) -> Mat {
        let mut a = mean.clone();
        for mut col in a.column_iter_mut() {
            for (i, v) in col.iter_mut().enumerate() {
                let xi: f64 = StandardNormal.sample(rng);
                *v += self.std(i) * xi;
            }
        }
        a
    }

    /// Log-density of each column of `action` (row vector `1 × batch`).
    pub fn log_prob(&self, mean: &Mat, action: &Mat) -> Vec<f64> {
        (0..mean.ncols())
            .map(|j| {
                (0..self.dim())
                    .map(|i| {
                        let ls = self.log_std[(i, 0)];
                        let u = (action[(i, j)] - mean[(i, j)]) / ls.exp();
                        -0.5 * u * u - ls - 0.5 * LN_2PI
                    })
                    .sum()
            })
            .collect()
    }

    /// `∂ log p / ∂ mean` per column, and `∂ Σ_j w_j log p_j / ∂ log σ`.
    pub fn log_prob_grads(&self, mean: &Mat, action: &Mat, weights: &[f64]) -> (Mat, Mat) {
        let mut dmean = Mat::zeros(mean.nrows(), mean.ncols());
        let mut dls = Mat::zeros(self.dim(), 1);
        for j in 0..mean.ncols() {
            for i in 0..self.dim() {
                let s = self.std(i);
                let d = action[(i, j)] - mean[(i, j)];
                dmean[(i, j)] = weights[j] * d / (s * s);
                dls[(i, 0)] += weights[j] * ((d / s).powi(2) - 1.0);
            }
        }
        (dmean, dls)
    }

    /// `Σ_i ½ ln(2πe σ_i²)`.
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| 0.5 * (LN_2PI + 1.0) + ls).sum()
    }
}

impl Params for GaussianHead {
    fn tensors(&self) -> Vec<&Mat> {
        vec![&self.log_std]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        vec![&mut self.log_std]
    }
}
