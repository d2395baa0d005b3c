//! Multi-layer perceptron: leaky-relu hidden layers, linear output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::fan_in_uniform;
use super::{add_bias, expect_rows, row_sums, Mat, NnError, Params};

pub const LEAK: f64 = 0.01;

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAK * x
    }
}

fn leaky_relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAK
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `(out × in)`.
    pub w: Mat,
    /// `(out × 1)`.
    pub b: Mat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input to each layer; the last one is the penultimate activation.
    pub inputs: Vec<Mat>,
    /// Pre-activation of each layer.
    pub pre: Vec<Mat>,
    pub output: Mat,
}

impl Mlp {
    /// `sizes = [in, hidden.., out]`. The last layer's weights are scaled by `out_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], out_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { out_gain } else { 1.0 };
                Linear { w: fan_in_uniform(rng, sizes[i + 1], sizes[i], gain), b: Mat::zeros(sizes[i + 1], 1) }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn forward(&self, x: &Mat) -> Result<MlpCache, NnError> {
        expect_rows(x, self.input_dim(), "mlp input")?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * &a;
            add_bias(&mut z, &l.b);
            inputs.push(a);
            a = if i + 1 == n { z.clone() } else { z.map(leaky_relu) };
            pre.push(z);
        }
        Ok(MlpCache { inputs, pre, output: a })
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, x: &Mat) -> Result<Mat, NnError> {
        expect_rows(x, self.input_dim(), "mlp input")?;
        let n = self.layers.len();
        let mut a = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.w * &a;
            add_bias(&mut z, &l.b);
            if i + 1 < n {
                z.apply(|v| *v = leaky_relu(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Gradients of `Σ grad_out ⊙ output` with respect to the parameters
    /// and the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Mat) -> (Mlp, Mat) {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut g = grad_out.clone();
        for i in (0..n).rev() {
            if i + 1 < n {
                g.zip_apply(&cache.pre[i], |gv, z| *gv *= leaky_relu_grad(z));
            }
            let l = &self.layers[i];
            grads.push(Linear { w: &g * cache.inputs[i].transpose(), b: row_sums(&g) });
            g = l.w.transpose() * &g;
        }
        grads.reverse();
        (Mlp { layers: grads }, g)
    }
}

impl Params for Mlp {
    fn tensors(&self) -> Vec<&Mat> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }
}
