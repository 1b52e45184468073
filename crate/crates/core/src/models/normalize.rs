//! Min-max scaling to `[0, 1]` fitted on training data.

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Training ranges of input and output. Values outside the training range
/// map outside `[0, 1]`; nothing is clipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl NormParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_max > self.x_min
            && self.y_max > self.y_min
            && [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParam(format!("degenerate normalization range {self:?}")));
        }
        Ok(())
    }

    #[inline]
    pub fn x_to_unit(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min)
    }

    #[inline]
    pub fn x_from_unit(&self, u: f64) -> f64 {
        self.x_min + u * (self.x_max - self.x_min)
    }

    #[inline]
    pub fn y_to_unit(&self, y: f64) -> f64 {
        (y - self.y_min) / (self.y_max - self.y_min)
    }

    #[inline]
    pub fn y_from_unit(&self, u: f64) -> f64 {
        self.y_min + u * (self.y_max - self.y_min)
    }

    pub fn apply_x(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.x_to_unit(x)).collect()
    }

    pub fn apply_y(&self, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.y_to_unit(y)).collect()
    }

    pub fn invert_y(&self, us: &[f64]) -> Vec<f64> {
        us.iter().map(|&u| self.y_from_unit(u)).collect()
    }
}

/// Fits the ranges over every training sample.
pub fn fit_normalizer(train: &Dataset) -> Result<NormParams> {
    let (x_min, x_max) = range(train.sequences.iter().flat_map(|s| s.x.iter().copied()));
    let (y_min, y_max) = range(train.sequences.iter().flat_map(|s| s.y.iter().copied()));
    let p = NormParams { x_min, x_max, y_min, y_max };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::dataset::{Direction, SequencePair};

    fn dataset(x: Vec<f64>, y: Vec<f64>) -> Dataset {
        Dataset {
            rate_hz: 25.0,
            direction: Direction::Forward,
            sequences: vec![SequencePair { x, y }],
        }
    }

    #[test]
    fn maps_training_range_to_unit_interval() {
        let n = fit_normalizer(&dataset(vec![0.0, 6.0, 3.0], vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(n.x_to_unit(0.0), 0.0);
        assert_eq!(n.x_to_unit(6.0), 1.0);
        assert_eq!(n.x_to_unit(3.0), 0.5);
    }

    #[test]
    fn extrapolates_without_clipping() {
        let n = fit_normalizer(&dataset(vec![0.0, 6.0], vec![0.0, 10.0])).unwrap();
        assert_eq!(n.x_to_unit(-3.0), -0.5);
        assert_eq!(n.y_to_unit(15.0), 1.5);
    }

    #[test]
    fn round_trip() {
        let n = fit_normalizer(&dataset(vec![-1.3, 4.7], vec![2.2, 57.9])).unwrap();
        for y in [2.2, 13.0, 57.9, 80.0, -4.0] {
            assert!((n.y_from_unit(n.y_to_unit(y)) - y).abs() < 1e-12);
        }
        for x in [-1.3, 0.0, 4.7] {
            assert!((n.x_from_unit(n.x_to_unit(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_range_rejected() {
        assert!(fit_normalizer(&dataset(vec![1.0, 1.0], vec![0.0, 1.0])).is_err());
    }
}
