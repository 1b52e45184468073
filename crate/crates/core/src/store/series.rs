//! Comma-separated trajectory files.
//!
//! ```text
//! t_s,q_cmd_mm,q_act_mm,theta_deg
//! 0.0,0.0,0.0,0.012
//! 0.04,0.0017,0.0005,-0.031
//! ```
//!
//! `t_s` and `q_cmd_mm` are required; `q_act_mm`, `theta_deg` and `tension_N`
//! are optional and always written in that order. Numbers use the shortest
//! decimal form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::excitation::{Channel, KinematicSeries};

/// Largest allowed deviation of a time step from the mean step, in seconds.
pub const DT_TOLERANCE_S: f64 = 1e-9;

const OPTIONAL: [Channel; 3] = [Channel::QAct, Channel::Theta, Channel::Tension];

/// Renders `series` in the file format.
pub fn series_to_csv(series: &KinematicSeries) -> Result<String> {
    series.validate()?;
    let present: Vec<(Channel, &[f64])> = OPTIONAL
        .iter()
        .filter_map(|&c| series.channel(c).map(|v| (c, v)))
        .collect();
    let mut out = String::from("t_s,q_cmd_mm");
    for (c, _) in &present {
        out.push(',');
        out.push_str(c.column_name());
    }
    out.push('\n');
    for k in 0..series.len() {
        let row = std::iter::once(series.time(k))
            .chain(std::iter::once(series.q_cmd_mm[k]))
            .chain(present.iter().map(|(_, v)| v[k]));
        for (i, v) in row.enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("sample {k} has a non-finite value")));
            }
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses the file format. `origin` names the source in error messages.
pub fn series_from_csv(text: &str, origin: &str) -> Result<KinematicSeries> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "file is empty".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut columns: Vec<Option<Channel>> = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let col = match *name {
            "t_s" if i == 0 => None,
            "q_cmd_mm" if i == 1 => Some(Channel::QCmd),
            n => {
                let c = OPTIONAL
                    .iter()
                    .copied()
                    .find(|c| c.column_name() == n)
                    .filter(|_| i >= 2)
                    .ok_or_else(|| err(1, format!("unexpected column '{n}' at position {}", i + 1)))?;
                if columns.contains(&Some(c)) {
                    return Err(err(1, format!("duplicate column '{n}'")));
                }
                Some(c)
            }
        };
        columns.push(col);
    }
    if names.len() < 2 {
        return Err(err(1, "header must start with t_s,q_cmd_mm".into()));
    }

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(err(idx + 1, format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        for (col, f) in fields.iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| err(idx + 1, format!("cannot parse '{}' as a number", f.trim())))?;
            if !v.is_finite() {
                return Err(err(idx + 1, format!("non-finite value '{}'", f.trim())));
            }
            values[col].push(v);
        }
    }
    let n = values[0].len();
    if n < 2 {
        return Err(err(1, format!("need at least 2 samples, found {n}")));
    }
    let t = &values[0];
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(err(2, "time column must be strictly increasing".into()));
    }
    for k in 1..n {
        if ((t[k] - t[k - 1]) - dt).abs() > DT_TOLERANCE_S {
            return Err(err(k + 2, format!("non-uniform time step {} (expected {dt})", t[k] - t[k - 1])));
        }
    }

    let mut series = KinematicSeries {
        dt_s: dt,
        t0_s: t[0],
        q_cmd_mm: Vec::new(),
        q_act_mm: None,
        theta_deg: None,
        tension_n: None,
    };
    for (col, v) in columns.into_iter().zip(values) {
        match col {
            None => {}
            Some(Channel::QCmd) => series.q_cmd_mm = v,
            Some(Channel::QAct) => series.q_act_mm = Some(v),
            Some(Channel::Theta) => series.theta_deg = Some(v),
            Some(Channel::Tension) => series.tension_n = Some(v),
        }
    }
    series.validate()?;
    Ok(series)
}

pub fn save_series(path: &Path, series: &KinematicSeries) -> Result<()> {
    let text = series_to_csv(series)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_series(path: &Path) -> Result<KinematicSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    series_from_csv(&text, &path.display().to_string())
}
