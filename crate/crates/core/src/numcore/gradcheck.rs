//! Central-difference verification of analytic gradients.

use rand::Rng;

use super::optim::Param;
use super::rng::prng;
use crate::error::Result;

/// A scalar objective over a set of parameter tensors.
///
/// Implementors bind a model to a fixed batch of data.
pub trait Differentiable {
    fn params_mut(&mut self) -> Vec<&mut Param>;

    /// Objective value only.
    fn loss(&self) -> Result<f64>;

    /// Objective value, accumulating gradients into each `Param::grad`.
    fn loss_and_grad(&mut self) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Above this many scalar parameters, a random subsample is checked instead.
    pub exhaustive_limit: usize,
    /// Subsample size when the limit is exceeded (never fewer than 200).
    pub sample_size: usize,
    /// Denominator floor for the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            exhaustive_limit: 10_000,
            sample_size: 2_000,
            floor: 1e-6,
            seed: 0x6772_6164,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    pub total: usize,
}

/// Compares analytic gradients to central differences; the relative error of an
/// entry is `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check<D: Differentiable>(target: &mut D, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    for p in target.params_mut() {
        p.zero_grad();
    }
    target.loss_and_grad()?;
    let analytic: Vec<Vec<f64>> = target.params_mut().iter().map(|p| p.grad.data().to_vec()).collect();
    for p in target.params_mut() {
        p.zero_grad();
    }

    let total: usize = analytic.iter().map(Vec::len).sum();
    let entries: Vec<(usize, usize)> = if total <= opts.exhaustive_limit {
        analytic
            .iter()
            .enumerate()
            .flat_map(|(t, g)| (0..g.len()).map(move |i| (t, i)))
            .collect()
    } else {
        // Every tensor gets a share proportional to its size, at least a few entries.
        let want = opts.sample_size.max(200);
        let mut rng = prng(opts.seed);
        let mut picks = Vec::new();
        for (t, g) in analytic.iter().enumerate() {
            let share = ((want * g.len()).div_ceil(total)).clamp(g.len().min(8), g.len());
            for _ in 0..share {
                picks.push((t, rng.random_range(0..g.len())));
            }
        }
        picks
    };

    let h = opts.step;
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for &(t, i) in &entries {
        let orig = target.params_mut()[t].value.data()[i];
        target.params_mut()[t].value.data_mut()[i] = orig + h;
        let lp = target.loss()?;
        target.params_mut()[t].value.data_mut()[i] = orig - h;
        let lm = target.loss()?;
        target.params_mut()[t].value.data_mut()[i] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let a = analytic[t][i];
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        checked: entries.len(),
        total,
    })
}
