//! Error metrics, hysteresis-loop diagnostics and model comparison reports.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::excitation::{quadratic_peak, BaselineKind, Channel, KinematicSeries};
use crate::models::{predict_for, Direction, NetworkKind, TrainedModel};

/// Number of bins on the displacement grid used for loop comparisons.
pub const LOOP_BINS: usize = 50;

/// Minimum per-sample change of the input counted as moving.
pub const TURNING_DEAD_ZONE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    /// `rmse / y_range`, as a fraction.
    pub nrmse: f64,
    /// Range of the ground-truth series.
    pub y_range: f64,
    pub n: usize,
}

/// Root-mean-square error and its normalisation by the truth range.
pub fn rmse_nrmse(pred: &[f64], truth: &[f64]) -> Result<Metrics> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "prediction has {} samples, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::InvalidParam("metrics need at least 2 samples".into()));
    }
    let (lo, hi) = min_max(truth);
    let y_range = hi - lo;
    if !(y_range > 0.0) {
        return Err(Error::InvalidParam("ground truth has zero range".into()));
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    let rmse = (sse / truth.len() as f64).sqrt();
    if !rmse.is_finite() {
        return Err(Error::NonFinite("prediction contains non-finite values".into()));
    }
    Ok(Metrics {
        rmse,
        nrmse: rmse / y_range,
        y_range,
        n: truth.len(),
    })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Loading and unloading branches of `y(q)` averaged onto a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopBranches {
    /// Bin centres on the swept range of `q`.
    pub grid: Vec<f64>,
    /// Mean `y` over loading passes per bin, `None` where no pass covers the bin.
    pub loading: Vec<Option<f64>>,
    pub unloading: Vec<Option<f64>>,
}

impl LoopBranches {
    /// `|loading - unloading|` at every bin both branches cover.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.grid
            .iter()
            .zip(self.loading.iter().zip(&self.unloading))
            .filter_map(|(&q, (l, u))| Some((q, (l.as_ref()? - u.as_ref()?).abs())))
            .collect()
    }
}

/// Splits `y(q)` into loading (`q` rising) and unloading (`q` falling) passes
/// and linearly interpolates each pass onto `bins` centres over the swept range.
pub fn loop_branches(q: &[f64], y: &[f64], bins: usize) -> Result<LoopBranches> {
    if q.len() != y.len() {
        return Err(Error::Shape(format!("q has {} samples, y has {}", q.len(), y.len())));
    }
    if q.len() < 3 || bins < 2 {
        return Err(Error::InvalidParam("loop analysis needs at least 3 samples and 2 bins".into()));
    }
    let (lo, hi) = min_max(q);
    if !(hi > lo) {
        return Err(Error::InvalidParam("input does not sweep a range".into()));
    }
    let width = (hi - lo) / bins as f64;
    let grid: Vec<f64> = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();

    // Direction per sample from central differences, 0 inside the dead zone.
    let n = q.len();
    let sign: Vec<i8> = (0..n)
        .map(|k| {
            let d = match k {
                0 => q[1] - q[0],
                k if k == n - 1 => q[n - 1] - q[n - 2],
                k => 0.5 * (q[k + 1] - q[k - 1]),
            };
            if d > TURNING_DEAD_ZONE {
                1
            } else if d < -TURNING_DEAD_ZONE {
                -1
            } else {
                0
            }
        })
        .collect();

    let mut sums = [vec![0.0; bins], vec![0.0; bins]];
    let mut counts = [vec![0usize; bins], vec![0usize; bins]];
    let mut k = 0;
    while k < n {
        if sign[k] == 0 {
            k += 1;
            continue;
        }
        let s = sign[k];
        let start = k;
        while k < n && sign[k] == s {
            k += 1;
        }
        // Keep the pass monotone: include the neighbouring samples so the
        // segment reaches its turning points.
        let a = start.saturating_sub(1);
        let b = k.min(n - 1);
        let branch = if s > 0 { 0 } else { 1 };
        accumulate_pass(&q[a..=b], &y[a..=b], s, &grid, &mut sums[branch], &mut counts[branch]);
    }

    let mean = |s: &[f64], c: &[usize]| -> Vec<Option<f64>> {
        s.iter().zip(c).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect()
    };
    Ok(LoopBranches {
        loading: mean(&sums[0], &counts[0]),
        unloading: mean(&sums[1], &counts[1]),
        grid,
    })
}

fn accumulate_pass(q: &[f64], y: &[f64], dir: i8, grid: &[f64], sums: &mut [f64], counts: &mut [usize]) {
    for (b, &g) in grid.iter().enumerate() {
        for i in 0..q.len() - 1 {
            let (q0, q1) = (q[i], q[i + 1]);
            let inside = if dir > 0 { q0 <= g && g <= q1 } else { q1 <= g && g <= q0 };
            if inside && q0 != q1 {
                let w = (g - q0) / (q1 - q0);
                sums[b] += y[i] + w * (y[i + 1] - y[i]);
                counts[b] += 1;
                break;
            }
        }
    }
}

/// Largest vertical gap between the loading and unloading branches of `y(q)`.
pub fn loop_width(q: &[f64], y: &[f64]) -> Result<f64> {
    let gaps = loop_branches(q, y, LOOP_BINS)?.gaps();
    if gaps.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "only {} bins are covered by both branches",
            gaps.len()
        )));
    }
    Ok(gaps.iter().fold(0.0, |m, &(_, g)| m.max(g)))
}

/// [`loop_width`] of tip angle against commanded displacement.
pub fn series_loop_width(series: &KinematicSeries) -> Result<f64> {
    loop_width(&series.q_cmd_mm, series.require(Channel::Theta)?)
}

/// Per-cycle maximum of `y`, with cycles delimited by the troughs of `q`.
/// Each maximum is refined through its neighbours. Only segments containing
/// a peak of `q` count as cycles.
pub fn cycle_peaks_of(q: &[f64], y: &[f64], dt: f64, t0: f64) -> Result<Vec<(f64, f64)>> {
    if q.len() != y.len() {
        return Err(Error::Shape(format!("q has {} samples, y has {}", q.len(), y.len())));
    }
    let n = q.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let mut bounds = vec![0];
    for k in 1..n - 1 {
        if q[k] < q[k - 1] && q[k] <= q[k + 1] {
            bounds.push(k);
        }
    }
    bounds.push(n - 1);
    let mut peaks = Vec::new();
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let has_peak = (a.max(1)..b.min(n - 1)).any(|k| q[k] > q[k - 1] && q[k] >= q[k + 1]);
        if !has_peak {
            continue;
        }
        let mut best = a;
        for k in a..=b {
            if y[k] > y[best] {
                best = k;
            }
        }
        let (off, v) = if best > 0 && best < n - 1 {
            quadratic_peak(y[best - 1], y[best], y[best + 1])
        } else {
            (0.0, y[best])
        };
        peaks.push((t0 + (best as f64 + off) * dt, v));
    }
    Ok(peaks)
}

/// Per-cycle tip-angle peaks of a simulated series.
pub fn cycle_peaks(series: &KinematicSeries) -> Result<Vec<(f64, f64)>> {
    cycle_peaks_of(&series.q_cmd_mm, series.require(Channel::Theta)?, series.dt_s, series.t0_s)
}

/// One held-out trajectory with its protocol labels.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub freq_hz: f64,
    pub baseline: BaselineKind,
    pub series: KinematicSeries,
}

/// Result for one (model, direction, test trajectory) combination.
#[derive(Debug, Clone)]
pub struct Cell {
    pub kind: NetworkKind,
    pub direction: Direction,
    pub freq_hz: f64,
    pub baseline: BaselineKind,
    /// `None` when no model of this kind and direction was supplied.
    pub metrics: Option<Metrics>,
    pub prediction: Option<Vec<f64>>,
}

/// FNN error over the better of the two history models for one test slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub direction: Direction,
    pub freq_hz: f64,
    pub baseline: BaselineKind,
    pub value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub cells: Vec<Cell>,
    pub ratios: Vec<Ratio>,
}

fn same_family(a: NetworkKind, b: NetworkKind) -> bool {
    std::mem::discriminant(&a) == std::mem::discriminant(&b)
}

/// Evaluates every model family in `kinds` on every test case in each
/// direction. Missing models yield cells without metrics.
pub fn compare(models: &[TrainedModel], tests: &[TestCase], directions: &[Direction], kinds: &[NetworkKind]) -> Result<EvalReport> {
    let mut cells = Vec::new();
    let mut ratios = Vec::new();
    for &direction in directions {
        let (_, out_ch) = direction.channels();
        for test in tests {
            let truth = test.series.require(out_ch)?;
            let mut slot = Vec::new();
            for &kind in kinds {
                let model = models
                    .iter()
                    .find(|m| m.direction == direction && same_family(m.kind, kind));
                let (metrics, prediction) = match model {
                    Some(m) => {
                        let pred = predict_for(m, &test.series)?;
                        (Some(rmse_nrmse(&pred, truth)?), Some(pred))
                    }
                    None => (None, None),
                };
                slot.push((kind, metrics));
                cells.push(Cell {
                    kind: model.map_or(kind, |m| m.kind),
                    direction,
                    freq_hz: test.freq_hz,
                    baseline: test.baseline,
                    metrics,
                    prediction,
                });
            }
            let nrmse = |f: fn(&NetworkKind) -> bool| -> Option<f64> {
                slot.iter().find(|(k, _)| f(k)).and_then(|(_, m)| m.map(|m| m.nrmse))
            };
            let fnn = nrmse(|k| matches!(k, NetworkKind::Fnn { .. }));
            let hib = nrmse(|k| matches!(k, NetworkKind::FnnHib { .. }));
            let lstm = nrmse(|k| matches!(k, NetworkKind::Lstm { .. }));
            let best = match (hib, lstm) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            ratios.push(Ratio {
                direction,
                freq_hz: test.freq_hz,
                baseline: test.baseline,
                value: fnn.zip(best).map(|(f, b)| f / b),
            });
        }
    }
    Ok(EvalReport { cells, ratios })
}

impl EvalReport {
    pub fn cell(&self, kind_key: &str, direction: Direction, freq_hz: f64, baseline: BaselineKind) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.kind.key() == kind_key && c.direction == direction && c.baseline == baseline && (c.freq_hz - freq_hz).abs() < 1e-9
        })
    }

    /// Cells with no metrics.
    pub fn missing(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.metrics.is_none()).collect()
    }

    /// Aligned table: one row per test slot, RMSE and NRMSE per model family,
    /// then the FNN-to-best ratio.
    pub fn to_table(&self) -> String {
        let mut kinds: Vec<NetworkKind> = Vec::new();
        for c in &self.cells {
            if !kinds.iter().any(|k| same_family(*k, c.kind)) {
                kinds.push(c.kind);
            }
        }
        let mut out = String::new();
        let _ = write!(out, "{:<9} {:>6} {:<7}", "direction", "f (Hz)", "input");
        for k in &kinds {
            let _ = write!(out, " | {:>9} {:>8}", format!("{} RMSE", k.label()), "NRMSE");
        }
        let _ = writeln!(out, " | {:>9}", "FNN/best");
        for r in &self.ratios {
            let _ = write!(out, "{:<9} {:>6.2} {:<7}", r.direction.to_string(), r.freq_hz, r.baseline.to_string());
            for k in &kinds {
                let cell = self.cells.iter().find(|c| {
                    same_family(c.kind, *k)
                        && c.direction == r.direction
                        && c.baseline == r.baseline
                        && (c.freq_hz - r.freq_hz).abs() < 1e-9
                });
                match cell.and_then(|c| c.metrics) {
                    Some(m) => {
                        let _ = write!(out, " | {:>9.3} {:>7.2}%", m.rmse, 100.0 * m.nrmse);
                    }
                    None => {
                        let _ = write!(out, " | {:>9} {:>8}", "missing", "-");
                    }
                }
            }
            match r.value {
                Some(v) => {
                    let _ = writeln!(out, " | {v:>9.2}");
                }
                None => {
                    let _ = writeln!(out, " | {:>9}", "-");
                }
            }
        }
        out
    }

    /// One line per cell: `model,direction,freq_hz,baseline,rmse,nrmse,y_range,n,fnn_ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,direction,freq_hz,baseline,rmse,nrmse,y_range,n,fnn_ratio\n");
        for c in &self.cells {
            let ratio = self
                .ratios
                .iter()
                .find(|r| r.direction == c.direction && r.baseline == c.baseline && (r.freq_hz - c.freq_hz).abs() < 1e-9)
                .and_then(|r| r.value);
            let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:?}"));
            let _ = writeln!(
                out,
                "{},{},{:?},{},{},{},{},{},{}",
                c.kind.key(),
                c.direction.key(),
                c.freq_hz,
                c.baseline.key(),
                opt(c.metrics.map(|m| m.rmse)),
                opt(c.metrics.map(|m| m.nrmse)),
                opt(c.metrics.map(|m| m.y_range)),
                c.metrics.map_or(String::new(), |m| m.n.to_string()),
                opt(ratio),
            );
        }
        out
    }
}
