//! Paired input/output sequences for forward and inverse maps.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::excitation::{Channel, KinematicSeries};

/// Which way a model maps: forward is actuation to tip angle, inverse is
/// tip angle to actuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Forward, Direction::Inverse];

    pub fn key(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Inverse => "inv",
        }
    }

    /// `(input channel, output channel)`.
    pub fn channels(self) -> (Channel, Channel) {
        match self {
            Direction::Forward => (Channel::QCmd, Channel::Theta),
            Direction::Inverse => (Channel::Theta, Channel::QCmd),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fwd" | "forward" => Ok(Direction::Forward),
            "inv" | "inverse" => Ok(Direction::Inverse),
            other => Err(Error::InvalidParam(format!(
                "unknown direction '{other}' (expected fwd or inv)"
            ))),
        }
    }
}

/// One trajectory's paired samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SequencePair {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Paired sequences that share one sampling rate. Trajectory boundaries are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rate_hz: f64,
    pub direction: Direction,
    pub sequences: Vec<SequencePair>,
}

impl Dataset {
    pub fn total_len(&self) -> usize {
        self.sequences.iter().map(SequencePair::len).sum()
    }
}

/// Pairs up the input and output channel of each series for `direction`.
pub fn make_dataset(series: &[KinematicSeries], direction: Direction) -> Result<Dataset> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidParam("make_dataset needs at least one series".into()))?;
    let dt = first.dt_s;
    let (cx, cy) = direction.channels();
    let mut sequences = Vec::with_capacity(series.len());
    for (i, s) in series.iter().enumerate() {
        s.validate()?;
        if ((s.dt_s - dt) / dt).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "series {i} is sampled at {} Hz but series 0 at {} Hz",
                s.rate_hz(),
                first.rate_hz()
            )));
        }
        sequences.push(SequencePair {
            x: s.require(cx)?.to_vec(),
            y: s.require(cy)?.to_vec(),
        });
    }
    Ok(Dataset {
        rate_hz: 1.0 / dt,
        direction,
        sequences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(dt: f64) -> KinematicSeries {
        let mut s = KinematicSeries::from_command(dt, 0.0, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        s.theta_deg = Some(vec![0.0, 8.0, 17.0, 25.0]);
        s.q_act_mm = Some(s.q_cmd_mm.clone());
        s
    }

    #[test]
    fn one_pair_per_sample_and_direction_swaps() {
        let s = series(0.04);
        let f = make_dataset(std::slice::from_ref(&s), Direction::Forward).unwrap();
        let i = make_dataset(std::slice::from_ref(&s), Direction::Inverse).unwrap();
        assert_eq!(f.total_len(), 4);
        assert_eq!(f.sequences[0].x, i.sequences[0].y);
        assert_eq!(f.sequences[0].y, i.sequences[0].x);
        assert_eq!(f.rate_hz, 25.0);
    }

    #[test]
    fn mixed_rates_rejected() {
        let err = make_dataset(&[series(0.04), series(0.01)], Direction::Forward).unwrap_err();
        assert!(err.to_string().contains("Hz"));
    }

    #[test]
    fn missing_output_channel_rejected() {
        let s = KinematicSeries::from_command(0.04, 0.0, vec![0.0, 1.0]).unwrap();
        assert!(make_dataset(&[s], Direction::Forward).is_err());
    }

    #[test]
    fn direction_parse() {
        assert_eq!("fwd".parse::<Direction>().unwrap(), Direction::Forward);
        assert_eq!("inverse".parse::<Direction>().unwrap(), Direction::Inverse);
        assert!("sideways".parse::<Direction>().is_err());
    }
}
