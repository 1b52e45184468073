//! Affine layers, ReLU and the ReLU multilayer perceptron.
//!
//! Batches are row-major: one sample per row.

use super::optim::Param;
use super::rng::{uniform_sym, Prng};
use super::tensor::{gemm, gemm_unchecked, Tensor2, Trans};
use crate::error::{Error, Result};

/// `y = x W^T + b` for a batch `x` of shape `B x in`, `W` of shape `out x in`, `b` of shape `1 x out`.
pub fn linear_forward(w: &Tensor2, b: &Tensor2, x: &Tensor2) -> Result<Tensor2> {
    if x.cols() != w.cols() || b.shape() != (1, w.rows()) {
        return Err(Error::Shape(format!(
            "linear: x is {}x{}, W is {}x{}, b is {}x{}",
            x.rows(),
            x.cols(),
            w.rows(),
            w.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut y = Tensor2::zeros(x.rows(), w.rows());
    y.add_row_broadcast(b);
    gemm(1.0, x, Trans::No, w, Trans::Yes, 1.0, &mut y)?;
    Ok(y)
}

/// Backward pass of [`linear_forward`]. Accumulates into `grad_w` / `grad_b` and
/// returns the gradient with respect to `x`.
pub fn linear_backward(
    w: &Tensor2,
    x: &Tensor2,
    dy: &Tensor2,
    grad_w: &mut Tensor2,
    grad_b: &mut Tensor2,
) -> Result<Tensor2> {
    if dy.shape() != (x.rows(), w.rows()) || grad_w.shape() != w.shape() || grad_b.shape() != (1, w.rows()) {
        return Err(Error::Shape(format!(
            "linear backward: x is {}x{}, dy is {}x{}, W is {}x{}",
            x.rows(),
            x.cols(),
            dy.rows(),
            dy.cols(),
            w.rows(),
            w.cols()
        )));
    }
    gemm(1.0, dy, Trans::Yes, x, Trans::No, 1.0, grad_w)?;
    for r in 0..dy.rows() {
        for (g, d) in grad_b.data_mut().iter_mut().zip(dy.row_slice(r)) {
            *g += d;
        }
    }
    let mut dx = Tensor2::zeros(x.rows(), w.cols());
    gemm_unchecked(1.0, dy, Trans::No, w, Trans::No, 0.0, &mut dx);
    Ok(dx)
}

pub fn relu(x: &Tensor2) -> Tensor2 {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient through ReLU given the pre-activation; the derivative at exactly 0 is 0.
pub fn relu_backward(pre: &Tensor2, dy: &Tensor2) -> Tensor2 {
    debug_assert_eq!(pre.shape(), dy.shape());
    let mut dx = dy.clone();
    for (d, p) in dx.data_mut().iter_mut().zip(pre.data()) {
        if *p <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// A fully connected layer with weight `out x in` and bias `1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
}

impl Linear {
    /// Uniform init in `±sqrt(1/fan_in)`, zero bias.
    pub fn new(input: usize, output: usize, rng: &mut Prng) -> Self {
        let bound = (1.0 / input as f64).sqrt();
        let mut w = Tensor2::zeros(output, input);
        w.data_mut().iter_mut().for_each(|v| *v = uniform_sym(rng, bound));
        Self {
            w: Param::new(w),
            b: Param::zeros(1, output),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.value.cols()
    }

    pub fn output_size(&self) -> usize {
        self.w.value.rows()
    }

    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        linear_forward(&self.w.value, &self.b.value, x)
    }

    pub fn backward(&mut self, x: &Tensor2, dy: &Tensor2) -> Result<Tensor2> {
        linear_backward(&self.w.value, x, dy, &mut self.w.grad, &mut self.b.grad)
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.w, &self.b]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.w, &mut self.b]
    }
}

/// Affine layers with ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Activations retained by [`Mlp::forward`] for the backward pass.
pub struct MlpCache {
    /// Input to each layer.
    inputs: Vec<Tensor2>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Tensor2>,
}

impl Mlp {
    pub fn new(sizes: &[usize], rng: &mut Prng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes.windows(2).map(|s| Linear::new(s[0], s[1], rng)).collect();
        Self { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].input_size()];
        s.extend(self.layers.iter().map(Linear::output_size));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, MlpCache)> {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n - 1);
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&a)?;
            inputs.push(a);
            if i + 1 < n {
                a = relu(&z);
                pre.push(z);
            } else {
                a = z;
            }
        }
        Ok((a, MlpCache { inputs, pre }))
    }

    pub fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        Ok(self.forward(x)?.0)
    }

    /// Accumulates parameter grads for output gradient `dy`; returns the input gradient.
    pub fn backward(&mut self, cache: &MlpCache, dy: &Tensor2) -> Result<Tensor2> {
        let n = self.layers.len();
        let mut d = dy.clone();
        for i in (0..n).rev() {
            if i + 1 < n {
                d = relu_backward(&cache.pre[i], &d);
            }
            d = self.layers[i].backward(&cache.inputs[i], &d)?;
        }
        Ok(d)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
