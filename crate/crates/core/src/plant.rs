//! Synthetic tendon-robot plants used as ground truth.
//!
//! Three variants:
//!
//! * [`LinearPlant`]: tip angle proportional to tendon displacement, no memory.
//! * [`BoucWenTensionPlant`]: rate-independent Bouc-Wen hysteresis from the
//!   input (tendon tension) to the tip angle.
//! * [`CatheterPlant`]: commanded displacement passes through a first-order
//!   actuator lag, tendon slack and Bouc-Wen hysteresis, then an angle offset
//!   and measurement noise are added. The lag makes the response rate-dependent.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::excitation::KinematicSeries;
use crate::numcore::rng::{prng, standard_normal};

/// Default largest Euler substep, in input units.
pub const DEFAULT_MAX_SUBSTEP: f64 = 1e-3;

/// Bouc-Wen operator `dz/dq = A - (beta sign(z dq) + gamma) |z|^n` plus the
/// output map `theta = c_lin q + c_hyst z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoucWenParams {
    pub a: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n_exp: f64,
    /// deg per input unit.
    pub c_lin: f64,
    /// deg per unit of `z`.
    pub c_hyst: f64,
}

// After a reversal the state forgets its past over about 1 / (beta + gamma)
// of travel (0.36 mm here), so a 2 s history at 25 Hz pins it down even at
// 0.1 Hz. `c_hyst * z_bound` sets the hysteretic share of the tip angle.
impl Default for BoucWenParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            beta: 2.0,
            gamma: 0.8,
            n_exp: 1.0,
            c_lin: 8.0,
            c_hyst: 20.0,
        }
    }
}

impl BoucWenParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.beta, self.gamma, self.n_exp, self.c_lin, self.c_hyst]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.a <= 0.0 || self.beta + self.gamma <= 0.0 || self.n_exp < 1.0 {
            return Err(Error::InvalidParam(format!(
                "Bouc-Wen needs A > 0, beta + gamma > 0, n >= 1; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Magnitude `(A / (beta + gamma))^(1/n)` that `|z|` cannot exceed.
    pub fn z_bound(&self) -> f64 {
        (self.a / (self.beta + self.gamma)).powf(1.0 / self.n_exp)
    }

    #[inline]
    fn rate(&self, z: f64, dq: f64) -> f64 {
        let s = (z * dq).signum();
        let s = if z * dq == 0.0 { 0.0 } else { s };
        let mag = if self.n_exp == 1.0 { z.abs() } else { z.abs().powf(self.n_exp) };
        self.a - (self.beta * s + self.gamma) * mag
    }
}

/// Advances the Bouc-Wen state from input `q_prev` to `q_now` with explicit
/// Euler. The increment is split into equal substeps no larger than
/// `max_substep`, so the result depends only on the input path and not on how
/// fast it was traversed.
pub fn bouc_wen_step(z: f64, q_now: f64, q_prev: f64, params: &BoucWenParams, max_substep: f64) -> Result<f64> {
    if !(z.is_finite() && q_now.is_finite() && q_prev.is_finite()) {
        return Err(Error::NonFinite(format!(
            "Bouc-Wen step with z = {z}, q_now = {q_now}, q_prev = {q_prev}"
        )));
    }
    if !(max_substep > 0.0) {
        return Err(Error::InvalidParam(format!("max substep must be > 0, got {max_substep}")));
    }
    let dq = q_now - q_prev;
    if dq == 0.0 {
        return Ok(z);
    }
    let n = ((dq.abs() / max_substep) - 1e-9).ceil().max(1.0) as usize;
    let h = dq / n as f64;
    let mut z = z;
    for _ in 0..n {
        z += h * params.rate(z, h);
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLagParams {
    pub time_constant_s: f64,
}

impl Default for ActuatorLagParams {
    fn default() -> Self {
        Self {
            time_constant_s: default_lag_time_constant(),
        }
    }
}

impl ActuatorLagParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_constant_s > 0.0 && self.time_constant_s.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "lag time constant must be > 0, got {}",
                self.time_constant_s
            )));
        }
        Ok(())
    }
}

/// Time constant of a first-order lag whose steady-state response to a
/// sinusoid oscillating about `mean` with half-swing `half_swing` at `freq_hz`
/// peaks at `actual_peak`.
pub fn lag_time_constant_for_peak(mean: f64, half_swing: f64, actual_peak: f64, freq_hz: f64) -> f64 {
    let gain = (actual_peak - mean) / half_swing;
    (1.0 / (gain * gain) - 1.0).sqrt() / (2.0 * PI * freq_hz)
}

/// A 0-6 mm command at 0.5 Hz reaching 5.80 mm.
pub fn default_lag_time_constant() -> f64 {
    lag_time_constant_for_peak(3.0, 3.0, 5.80, 0.5)
}

/// Exact update of `dp/dt = (q_cmd - p) / T` over `dt` with the command held.
pub fn actuator_lag_step(p: f64, q_cmd: f64, dt: f64, params: &ActuatorLagParams) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParam(format!("lag step needs dt > 0, got {dt}")));
    }
    params.validate()?;
    Ok(q_cmd + (p - q_cmd) * (-dt / params.time_constant_s).exp())
}

/// Tendon displacement that remains after taking up `slack_mm`.
pub fn apply_slack(p: f64, slack_mm: f64) -> f64 {
    (p - slack_mm).max(0.0)
}

/// Additive Gaussian noise on the tip angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoise {
    pub std_deg: f64,
    pub seed: u64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self { std_deg: 0.05, seed: 0 }
    }
}

impl MeasurementNoise {
    pub fn none() -> Self {
        Self { std_deg: 0.0, seed: 0 }
    }

    fn sequence(&self, n: usize) -> Result<Vec<f64>> {
        if !(self.std_deg >= 0.0 && self.std_deg.is_finite()) {
            return Err(Error::InvalidParam(format!("noise std must be >= 0, got {}", self.std_deg)));
        }
        if self.std_deg == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut rng = prng(self.seed);
        Ok((0..n).map(|_| self.std_deg * standard_normal(&mut rng)).collect())
    }
}

/// `theta = gain * q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPlant {
    pub gain_deg_per_mm: f64,
    pub noise: MeasurementNoise,
}

impl Default for LinearPlant {
    fn default() -> Self {
        Self {
            gain_deg_per_mm: 9.0,
            noise: MeasurementNoise::default(),
        }
    }
}

/// Rate-independent hysteresis from tendon tension to tip angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoucWenTensionPlant {
    pub bw: BoucWenParams,
    pub noise: MeasurementNoise,
    pub max_substep: f64,
}

impl Default for BoucWenTensionPlant {
    fn default() -> Self {
        Self {
            bw: BoucWenParams::default(),
            noise: MeasurementNoise::default(),
            max_substep: DEFAULT_MAX_SUBSTEP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatheterPlantParams {
    pub lag: ActuatorLagParams,
    pub slack_mm: f64,
    pub deadband_angle_deg: f64,
    pub bw: BoucWenParams,
    pub noise_std_deg: f64,
    pub rng_seed: u64,
}

impl Default for CatheterPlantParams {
    fn default() -> Self {
        Self {
            lag: ActuatorLagParams::default(),
            slack_mm: 0.0,
            deadband_angle_deg: 0.0,
            bw: BoucWenParams::default(),
            noise_std_deg: 0.05,
            rng_seed: 0,
        }
    }
}

impl CatheterPlantParams {
    pub fn validate(&self) -> Result<()> {
        self.lag.validate()?;
        self.bw.validate()?;
        if !(self.slack_mm >= 0.0) || !(self.deadband_angle_deg >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "slack ({}) and deadband angle ({}) must be >= 0",
                self.slack_mm, self.deadband_angle_deg
            )));
        }
        Ok(())
    }
}

/// Lag, slack and hysteresis in series: the clinical catheter stand-in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatheterPlant {
    pub params: CatheterPlantParams,
    pub max_substep: f64,
}

impl Default for CatheterPlant {
    fn default() -> Self {
        Self {
            params: CatheterPlantParams::default(),
            max_substep: DEFAULT_MAX_SUBSTEP,
        }
    }
}

/// Internal state carried between samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Bouc-Wen state.
    pub z: f64,
    /// Actual tendon displacement after the lag (mm).
    pub p_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plant {
    Linear(LinearPlant),
    BoucWenTension(BoucWenTensionPlant),
    Catheter(CatheterPlant),
}

impl Plant {
    pub fn name(&self) -> &'static str {
        match self {
            Plant::Linear(_) => "linear",
            Plant::BoucWenTension(_) => "bouc-wen-tension",
            Plant::Catheter(_) => "catheter",
        }
    }

    /// Copy of the plant with its noise stream reseeded.
    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Plant::Linear(p) => p.noise.seed = seed,
            Plant::BoucWenTension(p) => p.noise.seed = seed,
            Plant::Catheter(p) => p.params.rng_seed = seed,
        }
        self
    }

    /// Copy of the plant with measurement noise disabled.
    pub fn noiseless(mut self) -> Self {
        match &mut self {
            Plant::Linear(p) => p.noise.std_deg = 0.0,
            Plant::BoucWenTension(p) => p.noise.std_deg = 0.0,
            Plant::Catheter(p) => p.params.noise_std_deg = 0.0,
        }
        self
    }
}

/// Runs the plant over a uniformly sampled command from the rest state
/// (`z = 0`, `p = 0`). Output is aligned sample-for-sample with the input.
pub fn simulate(plant: &Plant, q_cmd: &[f64], dt: f64) -> Result<KinematicSeries> {
    if q_cmd.is_empty() {
        return Err(Error::InvalidParam("cannot simulate an empty command series".into()));
    }
    if q_cmd.len() < 2 {
        return Err(Error::InvalidParam("series needs at least 2 samples".into()));
    }
    if let Some(k) = q_cmd.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("command sample {k} is {}", q_cmd[k])));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParam(format!("dt must be > 0, got {dt}")));
    }
    let n = q_cmd.len();
    let mut series = KinematicSeries {
        dt_s: dt,
        t0_s: 0.0,
        q_cmd_mm: q_cmd.to_vec(),
        q_act_mm: None,
        theta_deg: None,
        tension_n: None,
    };
    match plant {
        Plant::Linear(lp) => {
            if !lp.gain_deg_per_mm.is_finite() {
                return Err(Error::InvalidParam("linear gain must be finite".into()));
            }
            let noise = lp.noise.sequence(n)?;
            series.theta_deg = Some(q_cmd.iter().zip(&noise).map(|(q, e)| lp.gain_deg_per_mm * q + e).collect());
            series.q_act_mm = Some(q_cmd.to_vec());
        }
        Plant::BoucWenTension(tp) => {
            tp.bw.validate()?;
            let noise = tp.noise.sequence(n)?;
            let mut theta = Vec::with_capacity(n);
            let mut z = 0.0;
            let mut prev = 0.0;
            for (&u, e) in q_cmd.iter().zip(&noise) {
                z = bouc_wen_step(z, u, prev, &tp.bw, tp.max_substep)?;
                prev = u;
                theta.push(tp.bw.c_lin * u + tp.bw.c_hyst * z + e);
            }
            series.theta_deg = Some(theta);
            series.q_act_mm = Some(q_cmd.to_vec());
            series.tension_n = Some(q_cmd.to_vec());
        }
        Plant::Catheter(cp) => {
            let prm = &cp.params;
            prm.validate()?;
            let noise = MeasurementNoise {
                std_deg: prm.noise_std_deg,
                seed: prm.rng_seed,
            }
            .sequence(n)?;
            let mut theta = Vec::with_capacity(n);
            let mut actual = Vec::with_capacity(n);
            let mut state = PlantState::default();
            let mut q_eff_prev = apply_slack(state.p_mm, prm.slack_mm);
            for (k, (&q, e)) in q_cmd.iter().zip(&noise).enumerate() {
                if k > 0 {
                    state.p_mm = actuator_lag_step(state.p_mm, q, dt, &prm.lag)?;
                }
                let q_eff = apply_slack(state.p_mm, prm.slack_mm);
                state.z = bouc_wen_step(state.z, q_eff, q_eff_prev, &prm.bw, cp.max_substep)?;
                q_eff_prev = q_eff;
                theta.push(prm.deadband_angle_deg + prm.bw.c_lin * q_eff + prm.bw.c_hyst * state.z + e);
                actual.push(state.p_mm);
            }
            series.theta_deg = Some(theta);
            series.q_act_mm = Some(actual);
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bw(a: f64, beta: f64, gamma: f64) -> BoucWenParams {
        BoucWenParams {
            a,
            beta,
            gamma,
            ..Default::default()
        }
    }

    #[test]
    fn zero_increment_keeps_state() {
        let p = BoucWenParams::default();
        assert_eq!(bouc_wen_step(0.37, 2.0, 2.0, &p, 1e-3).unwrap(), 0.37);
    }

    #[test]
    fn slope_at_origin_is_a() {
        let p = BoucWenParams::default();
        let z = bouc_wen_step(0.0, 0.001, 0.0, &p, 1e-3).unwrap();
        assert!((z - 0.001).abs() < 1e-9);
    }

    #[test]
    fn long_ramp_reaches_fixed_point() {
        let p = bw(1.0, 0.5, 0.2);
        let mut z = 0.0;
        let mut q = 0.0;
        while q < 50.0 {
            let next = (q + 0.04f64).min(50.0);
            z = bouc_wen_step(z, next, q, &p, 1e-4).unwrap();
            q = next;
        }
        assert!((z - 1.0 / 0.7).abs() < 1e-3, "z = {z}");
    }

    #[test]
    fn non_finite_rejected() {
        let p = BoucWenParams::default();
        assert!(bouc_wen_step(f64::NAN, 1.0, 0.0, &p, 1e-3).is_err());
        assert!(bouc_wen_step(0.0, f64::INFINITY, 0.0, &p, 1e-3).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(bw(1.0, -0.5, 0.2).validate().is_err());
        assert!(bw(0.0, 0.5, 0.2).validate().is_err());
        assert!(BoucWenParams::default().validate().is_ok());
    }

    #[test]
    fn lag_limits_and_exact_step() {
        let lag = ActuatorLagParams { time_constant_s: 0.1 };
        assert!((actuator_lag_step(0.0, 1.0, 100.0, &lag).unwrap() - 1.0).abs() < 1e-12);
        let p = actuator_lag_step(0.0, 1.0, 0.1, &lag).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((p - 0.6321).abs() < 1e-4);
        assert!(actuator_lag_step(0.0, 1.0, 0.0, &lag).is_err());
        assert!(actuator_lag_step(0.0, 1.0, -0.1, &lag).is_err());
    }

    #[test]
    fn lag_is_monotone() {
        let lag = ActuatorLagParams::default();
        for (p, q) in [(0.0, 1.0), (3.0, -2.0), (1.0, 1.0)] {
            let next = actuator_lag_step(p, q, 0.04, &lag).unwrap();
            assert!(next >= p.min(q) && next <= p.max(q));
        }
    }

    #[test]
    fn slack_cases() {
        assert_eq!(apply_slack(2.0, 3.0), 0.0);
        assert_eq!(apply_slack(5.0, 3.0), 2.0);
        assert_eq!(apply_slack(4.2, 0.0), 4.2);
    }

    #[test]
    fn default_time_constant_value() {
        let t = default_lag_time_constant();
        assert!((t - 0.12244).abs() < 1e-5, "{t}");
    }

    #[test]
    fn linear_plant_output() {
        let plant = Plant::Linear(LinearPlant {
            gain_deg_per_mm: 9.0,
            noise: MeasurementNoise::none(),
        });
        let s = simulate(&plant, &[0.0, 1.0, 2.0], 0.04).unwrap();
        assert_eq!(s.theta_deg.unwrap(), vec![0.0, 9.0, 18.0]);
    }

    #[test]
    fn zero_command_sits_at_deadband() {
        let plant = Plant::Catheter(CatheterPlant {
            params: CatheterPlantParams {
                deadband_angle_deg: 4.5,
                noise_std_deg: 0.0,
                slack_mm: 1.0,
                ..Default::default()
            },
            ..Default::default()
        });
        let s = simulate(&plant, &[0.0; 40], 0.04).unwrap();
        assert!(s.theta_deg.unwrap().iter().all(|t| *t == 4.5));
    }

    #[test]
    fn empty_command_rejected() {
        assert!(simulate(&Plant::Linear(LinearPlant::default()), &[], 0.04).is_err());
    }

    #[test]
    fn identical_seed_identical_series() {
        let plant = Plant::Catheter(CatheterPlant::default()).with_noise_seed(99);
        let q: Vec<f64> = (0..200).map(|k| 3.0 - 3.0 * (k as f64 * 0.05).cos()).collect();
        let a = simulate(&plant, &q, 0.04).unwrap();
        let b = simulate(&plant, &q, 0.04).unwrap();
        let bits = |s: &KinematicSeries| s.theta_deg.as_ref().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = simulate(&plant.with_noise_seed(100), &q, 0.04).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }
}
