//! LSTM layers with hand-derived backpropagation through time.
//!
//! Gate pre-activations are laid out as four column blocks `[i | f | g | o]`:
//!
//! ```text
//! i, f, o = sigmoid(x W + h_prev U + b)      (blocks 0, 1, 3)
//! g       = tanh(x W + h_prev U + b)         (block 2)
//! c       = f * c_prev + i * g
//! h       = o * tanh(c)
//! ```
//!
//! Sequences are stored time-major: rows `t*B .. (t+1)*B` hold step `t` of a
//! batch of `B` sequences.

use super::layers::Linear;
use super::optim::Param;
use super::rng::{uniform_sym, Prng};
use super::tensor::{gemm_unchecked, Tensor2, Trans};
use crate::error::{Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies gate nonlinearities in place to a `B x 4H` pre-activation block.
fn activate_gates(gates: &mut [f64], hidden: usize) {
    for row in gates.chunks_mut(4 * hidden) {
        let (ifg, o) = row.split_at_mut(3 * hidden);
        let (i_f, g) = ifg.split_at_mut(2 * hidden);
        i_f.iter_mut().for_each(|v| *v = sigmoid(*v));
        g.iter_mut().for_each(|v| *v = v.tanh());
        o.iter_mut().for_each(|v| *v = sigmoid(*v));
    }
}

/// One LSTM layer: `W` is `in x 4H`, `U` is `H x 4H`, `b` is `1 x 4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w: Param,
    pub u: Param,
    pub b: Param,
    hidden: usize,
}

/// Values retained from one cell step.
#[derive(Debug, Clone)]
pub struct CellCache {
    x: Tensor2,
    h_prev: Tensor2,
    c_prev: Tensor2,
    /// Activated gates `[i | f | g | o]`, `B x 4H`.
    gates: Tensor2,
    tanh_c: Tensor2,
}

/// Gradients flowing out of one cell step.
#[derive(Debug, Clone)]
pub struct CellGrads {
    pub dx: Tensor2,
    pub dh_prev: Tensor2,
    pub dc_prev: Tensor2,
}

/// Values retained from a full-sequence forward pass.
#[derive(Debug, Clone)]
pub struct SeqCache {
    steps: usize,
    batch: usize,
    xs: Tensor2,
    h0: Tensor2,
    c0: Tensor2,
    gates: Tensor2,
    cs: Tensor2,
    hs: Tensor2,
    tanh_cs: Tensor2,
}

impl SeqCache {
    /// Hidden states of every step, `T*B x H`.
    pub fn hidden(&self) -> &Tensor2 {
        &self.hs
    }

    /// Final `(h, c)` of the sequence, each `B x H`.
    pub fn final_state(&self) -> (Tensor2, Tensor2) {
        let lo = (self.steps - 1) * self.batch;
        let hi = self.steps * self.batch;
        (self.hs.rows_range(lo, hi), self.cs.rows_range(lo, hi))
    }
}

impl LstmLayer {
    /// Uniform init in `±sqrt(1/fan_in)` (fan-in of `W` is the input size, of `U` the
    /// hidden size), forget-gate bias 1, other biases 0.
    pub fn new(input: usize, hidden: usize, rng: &mut Prng) -> Self {
        let mut w = Tensor2::zeros(input, 4 * hidden);
        let bw = (1.0 / input as f64).sqrt();
        w.data_mut().iter_mut().for_each(|v| *v = uniform_sym(rng, bw));
        let mut u = Tensor2::zeros(hidden, 4 * hidden);
        let bu = (1.0 / hidden as f64).sqrt();
        u.data_mut().iter_mut().for_each(|v| *v = uniform_sym(rng, bu));
        let mut b = Tensor2::zeros(1, 4 * hidden);
        b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Self {
            w: Param::new(w),
            u: Param::new(u),
            b: Param::new(b),
            hidden,
        }
    }

    /// Builds a layer from explicit tensors, validating their shapes.
    pub fn from_params(w: Tensor2, u: Tensor2, b: Tensor2) -> Result<Self> {
        let hidden = u.rows();
        u.expect_shape("lstm U", hidden, 4 * hidden)?;
        w.expect_shape("lstm W", w.rows(), 4 * hidden)?;
        b.expect_shape("lstm b", 1, 4 * hidden)?;
        Ok(Self {
            w: Param::new(w),
            u: Param::new(u),
            b: Param::new(b),
            hidden,
        })
    }

    pub fn input_size(&self) -> usize {
        self.w.value.rows()
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> [&Param; 3] {
        [&self.w, &self.u, &self.b]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 3] {
        [&mut self.w, &mut self.u, &mut self.b]
    }

    fn check_step_shapes(&self, x: &Tensor2, h_prev: &Tensor2, c_prev: &Tensor2) -> Result<()> {
        let bsz = x.rows();
        x.expect_shape("lstm x", bsz, self.input_size())?;
        h_prev.expect_shape("lstm h_prev", bsz, self.hidden)?;
        c_prev.expect_shape("lstm c_prev", bsz, self.hidden)
    }

    /// One cell step. Returns `(h, c)` and the cache for [`LstmLayer::cell_backward`].
    pub fn cell_forward(&self, x: &Tensor2, h_prev: &Tensor2, c_prev: &Tensor2) -> Result<(Tensor2, Tensor2, CellCache)> {
        self.check_step_shapes(x, h_prev, c_prev)?;
        let hd = self.hidden;
        let bsz = x.rows();
        let mut gates = Tensor2::zeros(bsz, 4 * hd);
        gates.add_row_broadcast(&self.b.value);
        gemm_unchecked(1.0, x, Trans::No, &self.w.value, Trans::No, 1.0, &mut gates);
        gemm_unchecked(1.0, h_prev, Trans::No, &self.u.value, Trans::No, 1.0, &mut gates);
        activate_gates(gates.data_mut(), hd);
        let mut c = Tensor2::zeros(bsz, hd);
        let mut h = Tensor2::zeros(bsz, hd);
        let mut tanh_c = Tensor2::zeros(bsz, hd);
        cell_update(gates.data(), c_prev.data(), c.data_mut(), tanh_c.data_mut(), h.data_mut(), hd);
        let cache = CellCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            gates,
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// Backward through one cell step given upstream `dh` and `dc`.
    /// Accumulates parameter grads.
    pub fn cell_backward(&mut self, cache: &CellCache, dh: &Tensor2, dc: &Tensor2) -> Result<CellGrads> {
        let hd = self.hidden;
        let bsz = cache.x.rows();
        dh.expect_shape("lstm dh", bsz, hd)?;
        dc.expect_shape("lstm dc", bsz, hd)?;
        let mut dpre = Tensor2::zeros(bsz, 4 * hd);
        let mut dc_prev = Tensor2::zeros(bsz, hd);
        cell_grad(
            cache.gates.data(),
            cache.c_prev.data(),
            cache.tanh_c.data(),
            dh.data(),
            dc.data(),
            dpre.data_mut(),
            dc_prev.data_mut(),
            hd,
        );
        gemm_unchecked(1.0, &cache.x, Trans::Yes, &dpre, Trans::No, 1.0, &mut self.w.grad);
        gemm_unchecked(1.0, &cache.h_prev, Trans::Yes, &dpre, Trans::No, 1.0, &mut self.u.grad);
        self.b.grad.add_assign(&dpre.sum_rows());
        let mut dx = Tensor2::zeros(bsz, self.input_size());
        gemm_unchecked(1.0, &dpre, Trans::No, &self.w.value, Trans::Yes, 0.0, &mut dx);
        let mut dh_prev = Tensor2::zeros(bsz, hd);
        gemm_unchecked(1.0, &dpre, Trans::No, &self.u.value, Trans::Yes, 0.0, &mut dh_prev);
        Ok(CellGrads { dx, dh_prev, dc_prev })
    }

    /// Runs `steps` cell steps over a time-major input `xs` (`steps*batch x in`)
    /// starting from `(h0, c0)`, or zeros when `None`.
    pub fn forward_seq(&self, xs: &Tensor2, batch: usize, init: Option<(&Tensor2, &Tensor2)>) -> Result<SeqCache> {
        let hd = self.hidden;
        if batch == 0 || xs.rows() % batch != 0 || xs.rows() == 0 {
            return Err(Error::Shape(format!(
                "lstm sequence: {} rows is not a positive multiple of batch {batch}",
                xs.rows()
            )));
        }
        xs.expect_shape("lstm xs", xs.rows(), self.input_size())?;
        let steps = xs.rows() / batch;
        let (h0, c0) = match init {
            Some((h, c)) => {
                h.expect_shape("lstm h0", batch, hd)?;
                c.expect_shape("lstm c0", batch, hd)?;
                (h.clone(), c.clone())
            }
            None => (Tensor2::zeros(batch, hd), Tensor2::zeros(batch, hd)),
        };

        // Input projections for all steps in one product.
        let mut gates = Tensor2::zeros(xs.rows(), 4 * hd);
        gates.add_row_broadcast(&self.b.value);
        gemm_unchecked(1.0, xs, Trans::No, &self.w.value, Trans::No, 1.0, &mut gates);

        let mut cs = Tensor2::zeros(xs.rows(), hd);
        let mut hs = Tensor2::zeros(xs.rows(), hd);
        let mut tanh_cs = Tensor2::zeros(xs.rows(), hd);
        let mut step_gates = Tensor2::zeros(batch, 4 * hd);
        let mut h_prev = h0.clone();
        let mut c_prev = c0.clone();
        let gw = 4 * hd * batch;
        let sw = hd * batch;
        for t in 0..steps {
            step_gates
                .data_mut()
                .copy_from_slice(&gates.data()[t * gw..(t + 1) * gw]);
            gemm_unchecked(1.0, &h_prev, Trans::No, &self.u.value, Trans::No, 1.0, &mut step_gates);
            activate_gates(step_gates.data_mut(), hd);
            gates.data_mut()[t * gw..(t + 1) * gw].copy_from_slice(step_gates.data());
            {
                let c_out = &mut cs.data_mut()[t * sw..(t + 1) * sw];
                let tc_out = &mut tanh_cs.data_mut()[t * sw..(t + 1) * sw];
                let h_out = &mut hs.data_mut()[t * sw..(t + 1) * sw];
                cell_update(step_gates.data(), c_prev.data(), c_out, tc_out, h_out, hd);
            }
            h_prev.data_mut().copy_from_slice(&hs.data()[t * sw..(t + 1) * sw]);
            c_prev.data_mut().copy_from_slice(&cs.data()[t * sw..(t + 1) * sw]);
        }
        Ok(SeqCache {
            steps,
            batch,
            xs: xs.clone(),
            h0,
            c0,
            gates,
            cs,
            hs,
            tanh_cs,
        })
    }

    /// Full backpropagation through time. `dhs` is the loss gradient with respect
    /// to every hidden output (`T*B x H`). Accumulates parameter grads and returns
    /// the gradient with respect to the inputs plus the initial state gradients.
    pub fn backward_seq(&mut self, cache: &SeqCache, dhs: &Tensor2) -> Result<(Tensor2, Tensor2, Tensor2)> {
        let hd = self.hidden;
        let (steps, batch) = (cache.steps, cache.batch);
        dhs.expect_shape("lstm dhs", steps * batch, hd)?;
        let gw = 4 * hd * batch;
        let sw = hd * batch;
        let mut dpre = Tensor2::zeros(steps * batch, 4 * hd);
        let mut dh_next = Tensor2::zeros(batch, hd);
        let mut dc_next = Tensor2::zeros(batch, hd);
        let mut dh_total = Tensor2::zeros(batch, hd);
        let mut dc_prev = Tensor2::zeros(batch, hd);
        let mut dpre_step = Tensor2::zeros(batch, 4 * hd);
        for t in (0..steps).rev() {
            for ((o, a), b) in dh_total
                .data_mut()
                .iter_mut()
                .zip(&dhs.data()[t * sw..(t + 1) * sw])
                .zip(dh_next.data())
            {
                *o = a + b;
            }
            let c_prev = if t == 0 {
                cache.c0.data()
            } else {
                &cache.cs.data()[(t - 1) * sw..t * sw]
            };
            cell_grad(
                &cache.gates.data()[t * gw..(t + 1) * gw],
                c_prev,
                &cache.tanh_cs.data()[t * sw..(t + 1) * sw],
                dh_total.data(),
                dc_next.data(),
                dpre_step.data_mut(),
                dc_prev.data_mut(),
                hd,
            );
            dpre.data_mut()[t * gw..(t + 1) * gw].copy_from_slice(dpre_step.data());
            gemm_unchecked(1.0, &dpre_step, Trans::No, &self.u.value, Trans::Yes, 0.0, &mut dh_next);
            std::mem::swap(&mut dc_next, &mut dc_prev);
        }

        // Weight gradients for all steps at once.
        let mut h_prevs = Tensor2::zeros(steps * batch, hd);
        h_prevs.data_mut()[..sw].copy_from_slice(cache.h0.data());
        if steps > 1 {
            h_prevs.data_mut()[sw..].copy_from_slice(&cache.hs.data()[..(steps - 1) * sw]);
        }
        gemm_unchecked(1.0, &h_prevs, Trans::Yes, &dpre, Trans::No, 1.0, &mut self.u.grad);
        gemm_unchecked(1.0, &cache.xs, Trans::Yes, &dpre, Trans::No, 1.0, &mut self.w.grad);
        self.b.grad.add_assign(&dpre.sum_rows());
        let mut dxs = Tensor2::zeros(steps * batch, self.input_size());
        gemm_unchecked(1.0, &dpre, Trans::No, &self.w.value, Trans::Yes, 0.0, &mut dxs);
        Ok((dxs, dh_next, dc_next))
    }
}

/// `c = f*c_prev + i*g`, `h = o*tanh(c)` for a `B x H` block.
fn cell_update(gates: &[f64], c_prev: &[f64], c: &mut [f64], tanh_c: &mut [f64], h: &mut [f64], hd: usize) {
    for r in 0..c.len() / hd {
        let g_row = &gates[r * 4 * hd..(r + 1) * 4 * hd];
        for j in 0..hd {
            let k = r * hd + j;
            let (i, f, g, o) = (g_row[j], g_row[hd + j], g_row[2 * hd + j], g_row[3 * hd + j]);
            let cv = f * c_prev[k] + i * g;
            let tc = cv.tanh();
            c[k] = cv;
            tanh_c[k] = tc;
            h[k] = o * tc;
        }
    }
}

/// Gradient of one cell step with respect to the gate pre-activations and `c_prev`.
#[allow(clippy::too_many_arguments)]
fn cell_grad(
    gates: &[f64],
    c_prev: &[f64],
    tanh_c: &[f64],
    dh: &[f64],
    dc_in: &[f64],
    dpre: &mut [f64],
    dc_prev: &mut [f64],
    hd: usize,
) {
    for r in 0..dh.len() / hd {
        let g_row = &gates[r * 4 * hd..(r + 1) * 4 * hd];
        let d_row = &mut dpre[r * 4 * hd..(r + 1) * 4 * hd];
        for j in 0..hd {
            let k = r * hd + j;
            let (i, f, g, o) = (g_row[j], g_row[hd + j], g_row[2 * hd + j], g_row[3 * hd + j]);
            let tc = tanh_c[k];
            let d_o = dh[k] * tc;
            let dc = dh[k] * o * (1.0 - tc * tc) + dc_in[k];
            d_row[j] = dc * g * i * (1.0 - i);
            d_row[hd + j] = dc * c_prev[k] * f * (1.0 - f);
            d_row[2 * hd + j] = dc * i * (1.0 - g * g);
            d_row[3 * hd + j] = d_o * o * (1.0 - o);
            dc_prev[k] = dc * f;
        }
    }
}

/// Stacked LSTM layers followed by an affine head applied at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub layers: Vec<LstmLayer>,
    pub head: Linear,
}

/// Caches from [`LstmNet::forward`].
pub struct LstmNetCache {
    layers: Vec<SeqCache>,
}

impl LstmNet {
    pub fn new(input: usize, hidden: usize, num_layers: usize, output: usize, rng: &mut Prng) -> Self {
        assert!(num_layers >= 1);
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let inp = if l == 0 { input } else { hidden };
            layers.push(LstmLayer::new(inp, hidden, rng));
        }
        let head = Linear::new(hidden, output, rng);
        Self { layers, head }
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    /// Forward over a time-major batch from zero state. Returns outputs `T*B x out`.
    pub fn forward(&self, xs: &Tensor2, batch: usize) -> Result<(Tensor2, LstmNetCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut input = xs.clone();
        for layer in &self.layers {
            let cache = layer.forward_seq(&input, batch, None)?;
            input = cache.hidden().clone();
            caches.push(cache);
        }
        let y = self.head.forward(&input)?;
        Ok((y, LstmNetCache { layers: caches }))
    }

    pub fn predict(&self, xs: &Tensor2, batch: usize) -> Result<Tensor2> {
        Ok(self.forward(xs, batch)?.0)
    }

    /// Full BPTT from per-step output gradients `dy` (`T*B x out`). Returns the input gradient.
    pub fn backward(&mut self, cache: &LstmNetCache, dy: &Tensor2) -> Result<Tensor2> {
        let top = cache.layers.last().expect("at least one layer");
        let mut d = self.head.backward(top.hidden(), dy)?;
        for (layer, c) in self.layers.iter_mut().zip(&cache.layers).rev() {
            d = layer.backward_seq(c, &d)?.0;
        }
        Ok(d)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = self.layers.iter().flat_map(|l| l.params()).collect();
        v.extend(self.head.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = self.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
        v.extend(self.head.params_mut());
        v
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
