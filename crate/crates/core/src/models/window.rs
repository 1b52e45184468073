//! History windows for the buffered feedforward model.

use crate::error::{Error, Result};
use crate::numcore::Tensor2;

/// History length and the flag value that stands in for samples before a
/// trajectory starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub length: usize,
    pub flag_value: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length: 50,
            flag_value: -1.0,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 1 || !self.flag_value.is_finite() {
            return Err(Error::InvalidParam(format!("invalid window spec {self:?}")));
        }
        Ok(())
    }

    /// `length - 1` flags followed by `x`.
    pub fn padded(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![self.flag_value; self.length - 1];
        out.extend_from_slice(x);
        out
    }
}

/// One row per sample: row `k` is `[x[k-l+1], ..., x[k]]`, with flags in place
/// of samples before the start.
pub fn make_windows(x: &[f64], spec: &WindowSpec) -> Tensor2 {
    let l = spec.length;
    let padded = spec.padded(x);
    let mut data = Vec::with_capacity(x.len() * l);
    for k in 0..x.len() {
        data.extend_from_slice(&padded[k..k + l]);
    }
    Tensor2::from_vec(x.len(), l, data).expect("window buffer sized by construction")
}
