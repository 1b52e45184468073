//! Excitation signals and uniformly sampled kinematic series.
//!
//! The training signal is a decaying sinusoid
//!
//! ```text
//! q(t) = q_max * exp(-tau t) * (sin(2 pi f_h t - pi/2) + c) + q_offset,   0 <= t <= t_max
//! ```
//!
//! whose shrinking cycles sweep hysteresis loops over a range of sizes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parameters of one decaying-sinusoid trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationSpec {
    /// Amplitude (mm).
    pub q_max: f64,
    /// Shape constant; -1, 0 or 1 for the presets.
    pub c: f64,
    /// Mean offset (mm).
    pub q_offset: f64,
    /// Frequency (Hz).
    pub f_h: f64,
    /// Decay rate (1/s).
    pub tau: f64,
    /// Duration (s).
    pub t_max: f64,
}

impl ExcitationSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.q_max > 0.0
            && self.f_h > 0.0
            && self.tau >= 0.0
            && self.t_max > 0.0
            && [self.q_max, self.c, self.q_offset, self.f_h, self.tau, self.t_max]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParam(format!("invalid excitation {self:?}")));
        }
        Ok(())
    }

    /// Signal value at `t`, which must lie in `[0, t_max]`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        decaying_sinusoid(self, t)
    }

    /// The decaying part `q(t) - q_offset`, without range checks.
    pub fn decaying_term(&self, t: f64) -> f64 {
        self.q_max * (-self.tau * t).exp() * ((2.0 * PI * self.f_h * t - PI / 2.0).sin() + self.c)
    }
}

/// Evaluates the decaying sinusoid at time `t`.
pub fn decaying_sinusoid(spec: &ExcitationSpec, t: f64) -> Result<f64> {
    if !(0.0..=spec.t_max).contains(&t) {
        return Err(Error::InvalidParam(format!(
            "t = {t} s lies outside [0, {}] s",
            spec.t_max
        )));
    }
    Ok(spec.decaying_term(t) + spec.q_offset)
}

/// The three offset/shape presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineKind {
    /// Oscillates upward from 0 and decays toward 0.
    Zero,
    /// Starts at 0 and decays toward `q_max`.
    Mid,
    /// Starts at 0 and decays toward `2 q_max`.
    End,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::Zero, BaselineKind::Mid, BaselineKind::End];

    /// Short identifier used in file names and config values.
    pub fn key(self) -> &'static str {
        match self {
            BaselineKind::Zero => "zero",
            BaselineKind::Mid => "mid",
            BaselineKind::End => "end",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Zero => "0 BL",
            BaselineKind::Mid => "Mid BL",
            BaselineKind::End => "End BL",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "0" | "0bl" => Ok(BaselineKind::Zero),
            "mid" | "midbl" => Ok(BaselineKind::Mid),
            "end" | "endbl" => Ok(BaselineKind::End),
            other => Err(Error::InvalidParam(format!(
                "unknown baseline '{other}' (expected zero, mid or end)"
            ))),
        }
    }
}

/// Decay rate that shrinks each cycle by a factor 6/7: `tau = f_h ln(7/6)`.
pub fn preset_decay_rate(f_h: f64) -> f64 {
    f_h * (7.0f64 / 6.0).ln()
}

/// Builds one of the three decaying presets lasting `cycles` periods.
pub fn baseline_preset(kind: BaselineKind, f_h: f64, q_max: f64, cycles: f64) -> Result<ExcitationSpec> {
    if !(f_h > 0.0) {
        return Err(Error::InvalidParam(format!("f_h must be > 0, got {f_h}")));
    }
    let (c, q_offset) = match kind {
        BaselineKind::Zero => (1.0, 0.0),
        BaselineKind::Mid => (0.0, q_max),
        BaselineKind::End => (-1.0, 2.0 * q_max),
    };
    let spec = ExcitationSpec {
        q_max,
        c,
        q_offset,
        f_h,
        tau: preset_decay_rate(f_h),
        t_max: cycles / f_h,
    };
    spec.validate()?;
    Ok(spec)
}

/// Non-decaying cycles sweeping `0 ..= 2 q_max`.
pub fn constant_cycles(q_max: f64, f_h: f64, n_cycles: u32) -> Result<ExcitationSpec> {
    if n_cycles < 1 {
        return Err(Error::InvalidParam("n_cycles must be >= 1".into()));
    }
    let spec = ExcitationSpec {
        q_max,
        c: 1.0,
        q_offset: 0.0,
        f_h,
        tau: 0.0,
        t_max: n_cycles as f64 / f_h,
    };
    spec.validate()?;
    Ok(spec)
}

/// Number of grid points `k / rate` in `[0, duration]`, tolerant of round-off in `duration * rate`.
pub(crate) fn grid_len(duration: f64, rate_hz: f64) -> usize {
    (duration * rate_hz + 1e-9).floor() as usize + 1
}

/// Samples the command at `t = k / rate_hz`, `k = 0 ..= floor(t_max * rate_hz)`.
pub fn sample(spec: &ExcitationSpec, rate_hz: f64) -> Result<KinematicSeries> {
    spec.validate()?;
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidParam(format!("sampling rate must be > 0, got {rate_hz}")));
    }
    let n = grid_len(spec.t_max, rate_hz);
    let q: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 / rate_hz).min(spec.t_max);
            spec.decaying_term(t) + spec.q_offset
        })
        .collect();
    KinematicSeries::from_command(1.0 / rate_hz, 0.0, q)
}

/// Named columns of a [`KinematicSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    QCmd,
    QAct,
    Theta,
    Tension,
}

impl Channel {
    pub fn column_name(self) -> &'static str {
        match self {
            Channel::QCmd => "q_cmd_mm",
            Channel::QAct => "q_act_mm",
            Channel::Theta => "theta_deg",
            Channel::Tension => "tension_N",
        }
    }
}

/// A uniformly sampled trajectory.
///
/// `q_cmd_mm` always exists; the other channels are present once a plant has
/// been simulated. For tension-driven plants the command columns carry the
/// applied tension and `tension_n` repeats it.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSeries {
    pub dt_s: f64,
    pub t0_s: f64,
    pub q_cmd_mm: Vec<f64>,
    pub q_act_mm: Option<Vec<f64>>,
    pub theta_deg: Option<Vec<f64>>,
    pub tension_n: Option<Vec<f64>>,
}

impl KinematicSeries {
    pub fn from_command(dt_s: f64, t0_s: f64, q_cmd_mm: Vec<f64>) -> Result<Self> {
        let s = Self {
            dt_s,
            t0_s,
            q_cmd_mm,
            q_act_mm: None,
            theta_deg: None,
            tension_n: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks the length and spacing invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(Error::InvalidParam(format!("dt must be > 0, got {}", self.dt_s)));
        }
        let n = self.q_cmd_mm.len();
        if n < 2 {
            return Err(Error::InvalidParam(format!("series needs at least 2 samples, got {n}")));
        }
        for (name, ch) in [
            ("q_act_mm", &self.q_act_mm),
            ("theta_deg", &self.theta_deg),
            ("tension_N", &self.tension_n),
        ] {
            if let Some(v) = ch {
                if v.len() != n {
                    return Err(Error::Shape(format!("channel {name} has {} samples, q_cmd_mm has {n}", v.len())));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.q_cmd_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_cmd_mm.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        1.0 / self.dt_s
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0_s + k as f64 * self.dt_s
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt_s
    }

    pub fn channel(&self, ch: Channel) -> Option<&[f64]> {
        match ch {
            Channel::QCmd => Some(&self.q_cmd_mm),
            Channel::QAct => self.q_act_mm.as_deref(),
            Channel::Theta => self.theta_deg.as_deref(),
            Channel::Tension => self.tension_n.as_deref(),
        }
    }

    /// Like [`channel`](Self::channel) but an error when the channel is absent.
    pub fn require(&self, ch: Channel) -> Result<&[f64]> {
        self.channel(ch)
            .ok_or_else(|| Error::InvalidParam(format!("series has no {} channel", ch.column_name())))
    }

    fn map_channels(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> (Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
        (
            f(&self.q_cmd_mm),
            self.q_act_mm.as_deref().map(&f),
            self.theta_deg.as_deref().map(&f),
            self.tension_n.as_deref().map(&f),
        )
    }

    /// Samples `start..end` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let (q, a, th, tn) = self.map_channels(|v| v[start..end].to_vec());
        let s = Self {
            dt_s: self.dt_s,
            t0_s: self.time(start),
            q_cmd_mm: q,
            q_act_mm: a,
            theta_deg: th,
            tension_n: tn,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Linear interpolation of every channel onto the uniform grid
/// `t0 + k / rate_hz` covering the same time span.
pub fn resample(series: &KinematicSeries, rate_hz: f64) -> Result<KinematicSeries> {
    series.validate()?;
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidParam(format!("resampling rate must be > 0, got {rate_hz}")));
    }
    let n = grid_len(series.duration(), rate_hz);
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "resampling a {} s series at {rate_hz} Hz leaves fewer than 2 samples",
            series.duration()
        )));
    }
    let last = series.len() - 1;
    // (source index, fraction) per target sample; shared by all channels.
    let weights: Vec<(usize, f64)> = (0..n)
        .map(|k| {
            let pos = (k as f64 / rate_hz) / series.dt_s;
            let i = (pos.floor() as usize).min(last);
            let frac = pos - i as f64;
            if i == last || frac.abs() < 1e-9 {
                (i, 0.0)
            } else {
                (i, frac)
            }
        })
        .collect();
    let interp = |v: &[f64]| -> Vec<f64> {
        weights
            .iter()
            .map(|&(i, w)| if w == 0.0 { v[i] } else { v[i] + w * (v[i + 1] - v[i]) })
            .collect()
    };
    let (q, a, th, tn) = series.map_channels(interp);
    let out = KinematicSeries {
        dt_s: 1.0 / rate_hz,
        t0_s: series.t0_s,
        q_cmd_mm: q,
        q_act_mm: a,
        theta_deg: th,
        tension_n: tn,
    };
    out.validate()?;
    Ok(out)
}

/// Vertex of the parabola through three equally spaced samples, as
/// `(offset in samples relative to the middle one, peak value)`.
pub fn quadratic_peak(y_prev: f64, y_mid: f64, y_next: f64) -> (f64, f64) {
    let denom = y_prev - 2.0 * y_mid + y_next;
    if denom == 0.0 {
        return (0.0, y_mid);
    }
    let offset = 0.5 * (y_prev - y_next) / denom;
    let value = y_mid - 0.25 * (y_prev - y_next) * offset;
    (offset, value)
}

/// Strict interior local maxima, each refined by [`quadratic_peak`].
/// Returned as `(time, value)` with sample `k` at `t0 + k dt`.
pub fn refined_maxima(values: &[f64], dt: f64, t0: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
        if b > a && b >= c {
            let (off, v) = quadratic_peak(a, b, c);
            out.push((t0 + (k as f64 + off) * dt, v));
        }
    }
    out
}
