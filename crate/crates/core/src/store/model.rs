//! Plain-text model files.
//!
//! ```text
//! hystkin-model 1
//! kind fnn-hib(window=50,hidden=64)
//! direction fwd
//! window 50 -1.0
//! norm 0.0 6.0 -0.3 57.1
//! rate_hz 25.0
//! seed 0
//! config epochs=500 batch_size=16 lr=0.001 beta1=0.9 beta2=0.999 eps=1e-8 subseq_len=50 seed=0
//! loss_curve 500
//! 0.0123
//! ...
//! params 6
//! fc1.W 64 50
//! <one row per line, values separated by spaces>
//! ...
//! ```
//!
//! Every number is written in its shortest round-trip form, so loading a saved
//! model reproduces its parameters bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Direction, Network, NetworkKind, NormParams, TrainConfig, TrainedModel, WindowSpec};
use crate::numcore::{prng, AdamConfig, Param, Tensor2};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "hystkin-model";

pub fn model_to_text(model: &TrainedModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "kind {}", model.kind.describe());
    let _ = writeln!(out, "direction {}", model.direction.key());
    let _ = writeln!(out, "window {} {:?}", model.window.length, model.window.flag_value);
    let n = &model.norm;
    let _ = writeln!(out, "norm {:?} {:?} {:?} {:?}", n.x_min, n.x_max, n.y_min, n.y_max);
    let _ = writeln!(out, "rate_hz {:?}", model.rate_hz);
    let _ = writeln!(out, "seed {}", model.config.shuffle_seed);
    let _ = writeln!(out, "config {}", model.config.digest());
    let _ = writeln!(out, "loss_curve {}", model.loss_curve.len());
    for v in &model.loss_curve {
        let _ = writeln!(out, "{v:?}");
    }
    let params = model.network.params();
    let _ = writeln!(out, "params {}", params.len());
    for (name, p) in model.network.param_names().iter().zip(params) {
        let (r, c) = p.value.shape();
        let _ = writeln!(out, "{name} {r} {c}");
        for i in 0..r {
            let row = p.value.row_slice(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    origin: &'a str,
    last: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.to_string(),
            line: self.last,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l)
            }
            None => {
                self.last += 1;
                Err(self.err("unexpected end of file"))
            }
        }
    }

    /// Next line, which must start with `key`; returns the remaining fields.
    fn field(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected '{key}' line")));
        }
        Ok(parts.collect())
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn values(&self, fields: &[&str], want: usize) -> Result<Vec<f64>> {
        if fields.len() != want {
            return Err(self.err(format!("expected {want} values, found {}", fields.len())));
        }
        fields.iter().map(|f| self.num(f)).collect()
    }
}

fn parse_digest(s: &str) -> std::result::Result<TrainConfig, String> {
    let mut cfg = TrainConfig {
        adam: AdamConfig::default(),
        ..TrainConfig::default()
    };
    for kv in s.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("bad config entry '{kv}'"))?;
        let bad = || format!("bad value for {k}: '{v}'");
        match k {
            "epochs" => cfg.epochs = v.parse().map_err(|_| bad())?,
            "batch_size" => cfg.batch_size = v.parse().map_err(|_| bad())?,
            "lr" => cfg.adam.lr = v.parse().map_err(|_| bad())?,
            "beta1" => cfg.adam.beta1 = v.parse().map_err(|_| bad())?,
            "beta2" => cfg.adam.beta2 = v.parse().map_err(|_| bad())?,
            "eps" => cfg.adam.eps = v.parse().map_err(|_| bad())?,
            "subseq_len" => cfg.subseq_len = v.parse().map_err(|_| bad())?,
            "seed" => cfg.shuffle_seed = v.parse().map_err(|_| bad())?,
            _ => return Err(format!("unknown config entry '{k}'")),
        }
    }
    Ok(cfg)
}

pub fn model_from_text(text: &str, origin: &str) -> Result<TrainedModel> {
    let mut l = Lines {
        inner: text.lines().enumerate(),
        origin,
        last: 0,
    };
    let head = l.field(MAGIC)?;
    let version: u32 = l.num(head.first().copied().unwrap_or(""))?;
    if version != FORMAT_VERSION {
        return Err(l.err(format!("unsupported format version {version} (expected {FORMAT_VERSION})")));
    }
    let kind_f = l.field("kind")?;
    let kind = NetworkKind::parse_described(&kind_f.join(" ")).map_err(|e| l.err(e.to_string()))?;
    let dir_f = l.field("direction")?;
    let direction: Direction = dir_f.first().copied().unwrap_or("").parse().map_err(|e: Error| l.err(e.to_string()))?;
    let win_f = l.field("window")?;
    if win_f.len() != 2 {
        return Err(l.err("window needs length and flag value"));
    }
    let window = WindowSpec {
        length: l.num(win_f[0])?,
        flag_value: l.num(win_f[1])?,
    };
    window.validate().map_err(|e| l.err(e.to_string()))?;
    let norm_f = l.field("norm")?;
    let nv = l.values(&norm_f, 4)?;
    let norm = NormParams {
        x_min: nv[0],
        x_max: nv[1],
        y_min: nv[2],
        y_max: nv[3],
    };
    norm.validate().map_err(|e| l.err(e.to_string()))?;
    let rate_f = l.field("rate_hz")?;
    let rate_hz = l.values(&rate_f, 1)?[0];
    let seed_f = l.field("seed")?;
    let seed: u64 = l.num(seed_f.first().copied().unwrap_or(""))?;
    let cfg_f = l.field("config")?;
    let config = parse_digest(&cfg_f.join(" ")).map_err(|m| l.err(m))?;
    if config.shuffle_seed != seed {
        return Err(l.err("seed line disagrees with config digest"));
    }
    let curve_f = l.field("loss_curve")?;
    let curve_len: usize = l.num(curve_f.first().copied().unwrap_or(""))?;
    let mut loss_curve = Vec::with_capacity(curve_len);
    for _ in 0..curve_len {
        let line = l.next()?;
        loss_curve.push(l.num(line.trim())?);
    }

    let shapes = Network::expected_shapes(kind);
    let params_f = l.field("params")?;
    let count: usize = l.num(params_f.first().copied().unwrap_or(""))?;
    if count != shapes.len() {
        return Err(l.err(format!("{} declares {} tensors, found {count}", kind.describe(), shapes.len())));
    }
    let mut network = Network::new(kind, &mut prng(0))?;
    let names = network.param_names();
    let mut loaded = Vec::with_capacity(count);
    for (name, &(rows, cols)) in names.iter().zip(&shapes) {
        let header = l.field(name)?;
        if header.len() != 2 {
            return Err(l.err(format!("'{name}' header needs rows and cols")));
        }
        let (r, c): (usize, usize) = (l.num(header[0])?, l.num(header[1])?);
        if (r, c) != (rows, cols) {
            return Err(l.err(format!("'{name}' is {r}x{c} but {} requires {rows}x{cols}", kind.describe())));
        }
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r {
            let line = l.next()?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            data.extend(l.values(&fields, c)?);
        }
        loaded.push(Tensor2::from_vec(r, c, data)?);
    }
    for (p, value) in network.params_mut().into_iter().zip(loaded) {
        *p = Param::new(value);
    }
    if l.inner.any(|(_, line)| !line.trim().is_empty()) {
        return Err(Error::ModelFormat(format!("{origin}: trailing content after parameters")));
    }
    Ok(TrainedModel {
        kind,
        direction,
        window,
        norm,
        rate_hz,
        config,
        network,
        loss_curve,
    })
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    fs::write(path, model_to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::{baseline_preset, sample, BaselineKind};
    use crate::models::{predict_series, train};
    use crate::plant::{simulate, CatheterPlant, Plant};

    fn trained(kind: NetworkKind) -> TrainedModel {
        let spec = baseline_preset(BaselineKind::Mid, 0.5, 3.0, 2.0).unwrap();
        let cmd = sample(&spec, 25.0).unwrap();
        let s = simulate(&Plant::Catheter(CatheterPlant::default()), &cmd.q_cmd_mm, cmd.dt_s).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            shuffle_seed: 3,
            ..TrainConfig::default()
        };
        train(kind, Direction::Forward, &[s], &cfg).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in NetworkKind::defaults(8) {
            let m = trained(kind);
            let text = model_to_text(&m);
            let back = model_from_text(&text, "mem").unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_text(&back), text);
            let x = [0.0, 1.3, 2.7, 5.9, 6.4, 3.3];
            assert_eq!(predict_series(&back, &x).unwrap(), predict_series(&m, &x).unwrap());
        }
    }

    #[test]
    fn fnn_file_holds_every_parameter() {
        let m = trained(NetworkKind::fnn());
        let back = model_from_text(&model_to_text(&m), "mem").unwrap();
        assert_eq!(back.network.param_count(), 4353);
    }

    #[test]
    fn tampered_shape_is_reported() {
        let text = model_to_text(&trained(NetworkKind::fnn())).replace("fc2.W 64 64", "fc2.W 64 63");
        let err = model_from_text(&text, "mem").unwrap_err().to_string();
        assert!(err.contains("fc2.W"), "{err}");
    }

    #[test]
    fn version_mismatch_rejected() {
        let text = model_to_text(&trained(NetworkKind::fnn())).replacen("hystkin-model 1", "hystkin-model 9", 1);
        assert!(model_from_text(&text, "mem").unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn truncated_file_rejected() {
        let text = model_to_text(&trained(NetworkKind::fnn()));
        let cut = &text[..text.len() / 2];
        assert!(model_from_text(cut, "mem").is_err());
    }
}
