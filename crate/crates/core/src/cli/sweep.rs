//! Scenario sweeps: rate dependence of the catheter response and the
//! pretension trade-off between repeatability and deadband.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::{cycle_peaks_of, loop_width};
use crate::excitation::{constant_cycles, sample, Channel, KinematicSeries};
use crate::numcore::rng::{derive_seed, standard_normal};
use crate::numcore::prng;
use crate::plant::simulate;
use crate::store::ExperimentConfig;

/// One row of the rate-dependence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub freq_hz: f64,
    /// Mean tip-angle peak over the cycles after the first.
    pub peak_theta_deg: f64,
    /// Loop width of tip angle against commanded displacement (includes lag).
    pub loop_width_cmd_deg: f64,
    /// Loop width of tip angle against actual displacement.
    pub loop_width_act_deg: f64,
    pub peak_cmd_mm: f64,
    pub peak_act_mm: f64,
}

/// One row of the pretension table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretensionRow {
    pub pretension_mm: f64,
    pub mean_slack_mm: f64,
    pub deadband_deg: f64,
    /// RMS deviation of the tip angle from the trial mean.
    pub repeatability_deg: f64,
    pub peak_theta_deg: f64,
}

fn steady_mean(peaks: &[(f64, f64)]) -> Result<f64> {
    let tail = if peaks.len() > 1 { &peaks[1..] } else { peaks };
    if tail.is_empty() {
        return Err(Error::InvalidParam("no complete cycle to measure".into()));
    }
    Ok(tail.iter().map(|p| p.1).sum::<f64>() / tail.len() as f64)
}

fn cycles_series(cfg: &ExperimentConfig, freq_hz: f64) -> Result<KinematicSeries> {
    let spec = constant_cycles(cfg.excitation.q_max_mm, freq_hz, cfg.sweep.cycles)?;
    sample(&spec, cfg.excitation.rate_hz)
}

/// Constant-amplitude cycles at each sweep frequency through the configured
/// plant without measurement noise.
pub fn rate_dependence(cfg: &ExperimentConfig) -> Result<Vec<RateRow>> {
    let mut plant_cfg = cfg.plant.clone();
    plant_cfg.noise_std_deg = 0.0;
    let plant = plant_cfg.build(0)?;
    let mut rows = Vec::new();
    for &f in &cfg.sweep.frequencies {
        let cmd = cycles_series(cfg, f)?;
        let s = simulate(&plant, &cmd.q_cmd_mm, cmd.dt_s)?;
        let theta = s.require(Channel::Theta)?;
        let act = s.require(Channel::QAct)?;
        let q = &s.q_cmd_mm;
        rows.push(RateRow {
            freq_hz: f,
            peak_theta_deg: steady_mean(&cycle_peaks_of(q, theta, s.dt_s, s.t0_s)?)?,
            loop_width_cmd_deg: loop_width(q, theta)?,
            loop_width_act_deg: loop_width(act, theta)?,
            peak_cmd_mm: steady_mean(&cycle_peaks_of(q, q, s.dt_s, s.t0_s)?)?,
            peak_act_mm: steady_mean(&cycle_peaks_of(q, act, s.dt_s, s.t0_s)?)?,
        });
    }
    Ok(rows)
}

/// Repeated trials at the lowest sweep frequency for each pretension level.
/// Remaining slack is `max(0, nominal - pretension)` and varies between trials
/// by `slack_spread` times itself; the deadband grows with pretension.
pub fn pretension(cfg: &ExperimentConfig) -> Result<Vec<PretensionRow>> {
    let sw = &cfg.sweep;
    let freq = sw.frequencies.iter().copied().fold(f64::INFINITY, f64::min);
    let cmd = cycles_series(cfg, freq)?;
    let mut rows = Vec::new();
    for (level, &pre) in sw.pretension_mm.iter().enumerate() {
        if !(pre >= 0.0) {
            return Err(Error::Config(format!("pretension must be >= 0, got {pre}")));
        }
        let mean_slack = (sw.slack_nominal_mm - pre).max(0.0);
        let deadband = sw.deadband_per_mm_deg * pre;
        let mut rng = prng(derive_seed(cfg.seed, 0x5eed_0000 + level as u64));
        let mut trials: Vec<Vec<f64>> = Vec::with_capacity(sw.trials);
        for _ in 0..sw.trials {
            let slack = (mean_slack + sw.slack_spread * mean_slack * standard_normal(&mut rng)).max(0.0);
            let mut p = cfg.plant.clone();
            p.kind = crate::store::PlantKind::Catheter;
            p.noise_std_deg = 0.0;
            p.slack_mm = slack;
            p.deadband_deg = deadband;
            let s = simulate(&p.build(0)?, &cmd.q_cmd_mm, cmd.dt_s)?;
            trials.push(s.require(Channel::Theta)?.to_vec());
        }
        let n = cmd.len();
        let mut sq = 0.0;
        for k in 0..n {
            // Mean taken relative to the first trial so identical trials give exactly zero.
            let base = trials[0][k];
            let shift = trials.iter().map(|t| t[k] - base).sum::<f64>() / trials.len() as f64;
            sq += trials.iter().map(|t| (t[k] - base - shift).powi(2)).sum::<f64>();
        }
        let repeatability = (sq / (n * trials.len()) as f64).sqrt();
        let peak = trials
            .iter()
            .map(|t| steady_mean(&cycle_peaks_of(&cmd.q_cmd_mm, t, cmd.dt_s, cmd.t0_s)?))
            .collect::<Result<Vec<_>>>()?;
        rows.push(PretensionRow {
            pretension_mm: pre,
            mean_slack_mm: mean_slack,
            deadband_deg: deadband,
            repeatability_deg: repeatability,
            peak_theta_deg: peak.iter().sum::<f64>() / peak.len() as f64,
        });
    }
    Ok(rows)
}

pub fn rate_table(rows: &[RateRow]) -> String {
    let mut out = format!(
        "{:>7} {:>14} {:>14} {:>14} {:>12} {:>12}\n",
        "f (Hz)", "peak theta", "width vs cmd", "width vs act", "cmd peak", "actual peak"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>7.2} {:>10.3} deg {:>10.3} deg {:>10.3} deg {:>9.3} mm {:>9.3} mm",
            r.freq_hz, r.peak_theta_deg, r.loop_width_cmd_deg, r.loop_width_act_deg, r.peak_cmd_mm, r.peak_act_mm
        );
    }
    out
}

pub fn rate_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("freq_hz,peak_theta_deg,loop_width_cmd_deg,loop_width_act_deg,peak_cmd_mm,peak_act_mm\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?}",
            r.freq_hz, r.peak_theta_deg, r.loop_width_cmd_deg, r.loop_width_act_deg, r.peak_cmd_mm, r.peak_act_mm
        );
    }
    out
}

pub fn pretension_table(rows: &[PretensionRow]) -> String {
    let mut out = format!(
        "{:>11} {:>11} {:>10} {:>15} {:>12}\n",
        "pretension", "mean slack", "deadband", "repeatability", "peak theta"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>8.2} mm {:>8.2} mm {:>6.2} deg {:>11.4} deg {:>8.3} deg",
            r.pretension_mm, r.mean_slack_mm, r.deadband_deg, r.repeatability_deg, r.peak_theta_deg
        );
    }
    out
}

pub fn pretension_csv(rows: &[PretensionRow]) -> String {
    let mut out = String::from("pretension_mm,mean_slack_mm,deadband_deg,repeatability_deg,peak_theta_deg\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?}",
            r.pretension_mm, r.mean_slack_mm, r.deadband_deg, r.repeatability_deg, r.peak_theta_deg
        );
    }
    out
}
