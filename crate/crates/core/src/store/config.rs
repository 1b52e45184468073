//! Experiment configuration files.
//!
//! A config is a list of `key = value` lines grouped under `[section]`
//! headers. `seed` and `out_dir` may appear before the first section. Lines
//! starting with `#` are comments. Unknown sections and keys are errors, and
//! the `[plant]` section must be present (it may be empty). See
//! [`config_reference`] for every key and its default.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::excitation::BaselineKind;
use crate::models::{Direction, NetworkKind, TrainConfig};
use crate::numcore::AdamConfig;
use crate::plant::{
    default_lag_time_constant, ActuatorLagParams, BoucWenParams, BoucWenTensionPlant, CatheterPlant, CatheterPlantParams,
    LinearPlant, MeasurementNoise, Plant, DEFAULT_MAX_SUBSTEP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    Linear,
    BoucWenTension,
    Catheter,
}

impl PlantKind {
    pub fn key(self) -> &'static str {
        match self {
            PlantKind::Linear => "linear",
            PlantKind::BoucWenTension => "bouc-wen-tension",
            PlantKind::Catheter => "catheter",
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(PlantKind::Linear),
            "bouc-wen-tension" | "tension" => Ok(PlantKind::BoucWenTension),
            "catheter" => Ok(PlantKind::Catheter),
            _ => Err(format!("unknown plant kind '{s}' (expected linear, bouc-wen-tension or catheter)")),
        }
    }
}

/// Plant selection and parameters. Parameters that a kind does not use are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub kind: PlantKind,
    pub linear_gain_deg_per_mm: f64,
    pub bw: BoucWenParams,
    pub lag_time_constant_s: f64,
    pub slack_mm: f64,
    pub deadband_deg: f64,
    pub noise_std_deg: f64,
    pub max_substep: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            kind: PlantKind::Catheter,
            linear_gain_deg_per_mm: 9.0,
            bw: BoucWenParams::default(),
            lag_time_constant_s: default_lag_time_constant(),
            slack_mm: 0.0,
            deadband_deg: 0.0,
            noise_std_deg: 0.05,
            max_substep: DEFAULT_MAX_SUBSTEP,
        }
    }
}

impl PlantConfig {
    /// The configured plant with its noise stream seeded by `noise_seed`.
    pub fn build(&self, noise_seed: u64) -> Result<Plant> {
        let noise = MeasurementNoise {
            std_deg: self.noise_std_deg,
            seed: noise_seed,
        };
        let plant = match self.kind {
            PlantKind::Linear => Plant::Linear(LinearPlant {
                gain_deg_per_mm: self.linear_gain_deg_per_mm,
                noise,
            }),
            PlantKind::BoucWenTension => Plant::BoucWenTension(BoucWenTensionPlant {
                bw: self.bw,
                noise,
                max_substep: self.max_substep,
            }),
            PlantKind::Catheter => {
                let params = CatheterPlantParams {
                    lag: ActuatorLagParams {
                        time_constant_s: self.lag_time_constant_s,
                    },
                    slack_mm: self.slack_mm,
                    deadband_angle_deg: self.deadband_deg,
                    bw: self.bw,
                    noise_std_deg: self.noise_std_deg,
                    rng_seed: noise_seed,
                };
                params.validate()?;
                Plant::Catheter(CatheterPlant {
                    params,
                    max_substep: self.max_substep,
                })
            }
        };
        self.bw.validate()?;
        if !(self.max_substep > 0.0) {
            return Err(Error::Config(format!("max_substep must be > 0, got {}", self.max_substep)));
        }
        Ok(plant)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationConfig {
    pub rate_hz: f64,
    pub q_max_mm: f64,
    pub cycles: f64,
    pub baselines: Vec<BaselineKind>,
    /// Training frequencies.
    pub frequencies: Vec<f64>,
    pub test_frequencies: Vec<f64>,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        Self {
            rate_hz: 25.0,
            q_max_mm: 3.0,
            cycles: 12.0,
            baselines: BaselineKind::ALL.to_vec(),
            frequencies: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            test_frequencies: vec![0.15, 0.45],
        }
    }
}

/// Training hyperparameters and architecture sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub subseq_len: usize,
    pub window: usize,
    pub hidden: usize,
    pub lstm_layers: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            subseq_len: t.subseq_len,
            window: 50,
            hidden: 64,
            lstm_layers: 2,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                step_count: 0,
            },
            subseq_len: self.subseq_len,
            shuffle_seed: seed,
        }
    }

    /// Applies the configured sizes to a model family.
    pub fn resolve(&self, family: NetworkKind) -> NetworkKind {
        match family {
            NetworkKind::Fnn { .. } => NetworkKind::Fnn { hidden: self.hidden },
            NetworkKind::FnnHib { .. } => NetworkKind::FnnHib {
                window: self.window,
                hidden: self.hidden,
            },
            NetworkKind::Lstm { .. } => NetworkKind::Lstm {
                layers: self.lstm_layers,
                hidden: self.hidden,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Model families to compare.
    pub kinds: Vec<NetworkKind>,
    pub directions: Vec<Direction>,
    /// Write per-cell prediction columns next to the report.
    pub plot_data: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            kinds: NetworkKind::defaults(50).to_vec(),
            directions: Direction::ALL.to_vec(),
            plot_data: true,
        }
    }
}

/// Settings for the rate-dependence and pretension scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub frequencies: Vec<f64>,
    pub cycles: u32,
    /// Pretension take-up levels to compare.
    pub pretension_mm: Vec<f64>,
    /// Slack present with no pretension.
    pub slack_nominal_mm: f64,
    /// Trial-to-trial spread of the remaining slack, per mm of remaining slack.
    pub slack_spread: f64,
    /// Deadband angle added per mm of pretension.
    pub deadband_per_mm_deg: f64,
    pub trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            frequencies: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            cycles: 7,
            pretension_mm: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            slack_nominal_mm: 2.0,
            slack_spread: 0.25,
            deadband_per_mm_deg: 2.0,
            trials: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub plant: PlantConfig,
    pub excitation: ExcitationConfig,
    pub train: TrainSettings,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            plant: PlantConfig::default(),
            excitation: ExcitationConfig::default(),
            train: TrainSettings::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// `(section, key, description)` for every accepted key. Section `""` holds
/// the keys allowed before the first header.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("", "seed", "master seed for noise, initialisation and shuffling"),
    ("", "out_dir", "directory for generated files"),
    ("plant", "kind", "linear | bouc-wen-tension | catheter"),
    ("plant", "linear_gain_deg_per_mm", "slope of the linear plant"),
    ("plant", "bw_a", "Bouc-Wen gain A"),
    ("plant", "bw_beta", "Bouc-Wen beta"),
    ("plant", "bw_gamma", "Bouc-Wen gamma"),
    ("plant", "bw_n", "Bouc-Wen exponent"),
    ("plant", "c_lin", "tip angle per unit input (deg)"),
    ("plant", "c_hyst", "tip angle per unit hysteretic state (deg)"),
    ("plant", "lag_time_constant_s", "actuator lag time constant"),
    ("plant", "slack_mm", "tendon slack"),
    ("plant", "deadband_deg", "deadband angle offset"),
    ("plant", "noise_std_deg", "tip-angle measurement noise"),
    ("plant", "max_substep", "largest Bouc-Wen integration step (input units)"),
    ("excitation", "rate_hz", "sampling rate"),
    ("excitation", "q_max_mm", "excitation amplitude"),
    ("excitation", "cycles", "periods per decaying trajectory"),
    ("excitation", "baselines", "comma list of zero | mid | end"),
    ("excitation", "frequencies", "training frequencies (Hz, comma list)"),
    ("excitation", "test_frequencies", "held-out test frequencies (Hz, comma list)"),
    ("train", "epochs", "training epochs"),
    ("train", "batch_size", "mini-batch size"),
    ("train", "lr", "Adam learning rate"),
    ("train", "beta1", "Adam first-moment decay"),
    ("train", "beta2", "Adam second-moment decay"),
    ("train", "eps", "Adam epsilon"),
    ("train", "subseq_len", "LSTM training chunk length"),
    ("train", "window", "history buffer length of the buffered model"),
    ("train", "hidden", "hidden width of every model"),
    ("train", "lstm_layers", "stacked LSTM layers"),
    ("eval", "kinds", "comma list of fnn | fnn-hib | lstm"),
    ("eval", "directions", "comma list of fwd | inv"),
    ("eval", "plot_data", "write per-cell prediction files (true | false)"),
    ("sweep", "frequencies", "rate-dependence frequencies (Hz, comma list)"),
    ("sweep", "cycles", "constant-amplitude cycles per frequency"),
    ("sweep", "pretension_mm", "pretension levels (comma list)"),
    ("sweep", "slack_nominal_mm", "slack with no pretension"),
    ("sweep", "slack_spread", "relative trial-to-trial spread of remaining slack"),
    ("sweep", "deadband_per_mm_deg", "deadband angle per mm of pretension"),
    ("sweep", "trials", "repetitions per pretension level"),
];

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(f)
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("list is empty".into());
    }
    Ok(items)
}

fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("'{s}' is not a valid {}", std::any::type_name::<T>()))
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{s}' is not true or false")),
    }
}

impl ExperimentConfig {
    /// Current value of `section.key` in config syntax.
    pub fn get(&self, section: &str, key: &str) -> Option<String> {
        let (p, e, t, v, s) = (&self.plant, &self.excitation, &self.train, &self.eval, &self.sweep);
        Some(match (section, key) {
            ("", "seed") => self.seed.to_string(),
            ("", "out_dir") => self.out_dir.display().to_string(),
            ("plant", "kind") => p.kind.key().into(),
            ("plant", "linear_gain_deg_per_mm") => format!("{:?}", p.linear_gain_deg_per_mm),
            ("plant", "bw_a") => format!("{:?}", p.bw.a),
            ("plant", "bw_beta") => format!("{:?}", p.bw.beta),
            ("plant", "bw_gamma") => format!("{:?}", p.bw.gamma),
            ("plant", "bw_n") => format!("{:?}", p.bw.n_exp),
            ("plant", "c_lin") => format!("{:?}", p.bw.c_lin),
            ("plant", "c_hyst") => format!("{:?}", p.bw.c_hyst),
            ("plant", "lag_time_constant_s") => format!("{:?}", p.lag_time_constant_s),
            ("plant", "slack_mm") => format!("{:?}", p.slack_mm),
            ("plant", "deadband_deg") => format!("{:?}", p.deadband_deg),
            ("plant", "noise_std_deg") => format!("{:?}", p.noise_std_deg),
            ("plant", "max_substep") => format!("{:?}", p.max_substep),
            ("excitation", "rate_hz") => format!("{:?}", e.rate_hz),
            ("excitation", "q_max_mm") => format!("{:?}", e.q_max_mm),
            ("excitation", "cycles") => format!("{:?}", e.cycles),
            ("excitation", "baselines") => e.baselines.iter().map(|b| b.key()).collect::<Vec<_>>().join(","),
            ("excitation", "frequencies") => floats(&e.frequencies),
            ("excitation", "test_frequencies") => floats(&e.test_frequencies),
            ("train", "epochs") => t.epochs.to_string(),
            ("train", "batch_size") => t.batch_size.to_string(),
            ("train", "lr") => format!("{:?}", t.lr),
            ("train", "beta1") => format!("{:?}", t.beta1),
            ("train", "beta2") => format!("{:?}", t.beta2),
            ("train", "eps") => format!("{:?}", t.eps),
            ("train", "subseq_len") => t.subseq_len.to_string(),
            ("train", "window") => t.window.to_string(),
            ("train", "hidden") => t.hidden.to_string(),
            ("train", "lstm_layers") => t.lstm_layers.to_string(),
            ("eval", "kinds") => v.kinds.iter().map(|k| k.key()).collect::<Vec<_>>().join(","),
            ("eval", "directions") => v.directions.iter().map(|d| d.key()).collect::<Vec<_>>().join(","),
            ("eval", "plot_data") => v.plot_data.to_string(),
            ("sweep", "frequencies") => floats(&s.frequencies),
            ("sweep", "cycles") => s.cycles.to_string(),
            ("sweep", "pretension_mm") => floats(&s.pretension_mm),
            ("sweep", "slack_nominal_mm") => format!("{:?}", s.slack_nominal_mm),
            ("sweep", "slack_spread") => format!("{:?}", s.slack_spread),
            ("sweep", "deadband_per_mm_deg") => format!("{:?}", s.deadband_per_mm_deg),
            ("sweep", "trials") => s.trials.to_string(),
            _ => return None,
        })
    }

    /// Sets `section.key` from its text form. `Ok(false)` means the key is unknown.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<bool, String> {
        let (p, e, t, v, s) = (
            &mut self.plant,
            &mut self.excitation,
            &mut self.train,
            &mut self.eval,
            &mut self.sweep,
        );
        match (section, key) {
            ("", "seed") => self.seed = num(value)?,
            ("", "out_dir") => self.out_dir = PathBuf::from(value),
            ("plant", "kind") => p.kind = PlantKind::parse(value)?,
            ("plant", "linear_gain_deg_per_mm") => p.linear_gain_deg_per_mm = num(value)?,
            ("plant", "bw_a") => p.bw.a = num(value)?,
            ("plant", "bw_beta") => p.bw.beta = num(value)?,
            ("plant", "bw_gamma") => p.bw.gamma = num(value)?,
            ("plant", "bw_n") => p.bw.n_exp = num(value)?,
            ("plant", "c_lin") => p.bw.c_lin = num(value)?,
            ("plant", "c_hyst") => p.bw.c_hyst = num(value)?,
            ("plant", "lag_time_constant_s") => p.lag_time_constant_s = num(value)?,
            ("plant", "slack_mm") => p.slack_mm = num(value)?,
            ("plant", "deadband_deg") => p.deadband_deg = num(value)?,
            ("plant", "noise_std_deg") => p.noise_std_deg = num(value)?,
            ("plant", "max_substep") => p.max_substep = num(value)?,
            ("excitation", "rate_hz") => e.rate_hz = num(value)?,
            ("excitation", "q_max_mm") => e.q_max_mm = num(value)?,
            ("excitation", "cycles") => e.cycles = num(value)?,
            ("excitation", "baselines") => {
                e.baselines = parse_list(value, |x| x.parse::<BaselineKind>().map_err(|err| err.to_string()))?
            }
            ("excitation", "frequencies") => e.frequencies = parse_list(value, num)?,
            ("excitation", "test_frequencies") => e.test_frequencies = parse_list(value, num)?,
            ("train", "epochs") => t.epochs = num(value)?,
            ("train", "batch_size") => t.batch_size = num(value)?,
            ("train", "lr") => t.lr = num(value)?,
            ("train", "beta1") => t.beta1 = num(value)?,
            ("train", "beta2") => t.beta2 = num(value)?,
            ("train", "eps") => t.eps = num(value)?,
            ("train", "subseq_len") => t.subseq_len = num(value)?,
            ("train", "window") => t.window = num(value)?,
            ("train", "hidden") => t.hidden = num(value)?,
            ("train", "lstm_layers") => t.lstm_layers = num(value)?,
            ("eval", "kinds") => v.kinds = parse_list(value, |x| x.parse::<NetworkKind>().map_err(|err| err.to_string()))?,
            ("eval", "directions") => {
                v.directions = parse_list(value, |x| x.parse::<Direction>().map_err(|err| err.to_string()))?
            }
            ("eval", "plot_data") => v.plot_data = boolean(value)?,
            ("sweep", "frequencies") => s.frequencies = parse_list(value, num)?,
            ("sweep", "cycles") => s.cycles = num(value)?,
            ("sweep", "pretension_mm") => s.pretension_mm = parse_list(value, num)?,
            ("sweep", "slack_nominal_mm") => s.slack_nominal_mm = num(value)?,
            ("sweep", "slack_spread") => s.slack_spread = num(value)?,
            ("sweep", "deadband_per_mm_deg") => s.deadband_per_mm_deg = num(value)?,
            ("sweep", "trials") => s.trials = num(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Range checks that do not depend on the command being run.
    pub fn validate(&self) -> Result<()> {
        let e = &self.excitation;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("excitation.rate_hz", e.rate_hz)?;
        positive("excitation.q_max_mm", e.q_max_mm)?;
        positive("excitation.cycles", e.cycles)?;
        for &f in e.frequencies.iter().chain(&e.test_frequencies).chain(&self.sweep.frequencies) {
            positive("frequency", f)?;
        }
        self.plant.build(0)?;
        self.train
            .train_config(self.seed)
            .validate()
            .map_err(|err| Error::Config(err.to_string()))?;
        for k in &self.eval.kinds {
            self.train.resolve(*k).validate().map_err(|err| Error::Config(err.to_string()))?;
        }
        if self.sweep.trials < 1 || self.sweep.cycles < 1 {
            return Err(Error::Config("sweep.trials and sweep.cycles must be >= 1".into()));
        }
        if self.sweep.slack_nominal_mm < 0.0 || self.sweep.slack_spread < 0.0 {
            return Err(Error::Config("sweep slack settings must be >= 0".into()));
        }
        Ok(())
    }

    /// The whole config in file syntax.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for &(section, key, _) in KEYS {
            if section != current {
                let _ = writeln!(out, "\n[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {}", self.get(section, key).expect("every listed key has a value"));
        }
        out.trim_start().to_string()
    }
}

/// Every accepted key with its default and meaning.
pub fn config_reference() -> String {
    let d = ExperimentConfig::default();
    let mut out = String::from("Config keys (defaults in brackets):\n");
    let mut current = "-";
    for &(section, key, help) in KEYS {
        if section != current {
            let title = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
            let _ = writeln!(out, "  {title}");
            current = section;
        }
        let _ = writeln!(out, "    {key:<24} {help} [{}]", d.get(section, key).expect("listed key"));
    }
    out
}

/// Parses config text. `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    const SECTIONS: [&str; 5] = ["plant", "excitation", "train", "eval", "sweep"];
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    let mut seen_sections: Vec<String> = Vec::new();
    let mut seen_keys: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("malformed section header '{line}'")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(line_no, format!("unknown section [{name}]")));
            }
            if seen_sections.iter().any(|s| s == name) {
                return Err(err(line_no, format!("section [{name}] appears twice")));
            }
            seen_sections.push(name.to_string());
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected 'key = value', found '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if seen_keys.iter().any(|(s, k)| *s == section && k == key) {
            return Err(err(line_no, format!("key '{key}' set twice")));
        }
        let qualified = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        match cfg.set(&section, key, value) {
            Ok(true) => seen_keys.push((section.clone(), key.to_string())),
            Ok(false) => return Err(err(line_no, format!("unknown key '{qualified}'"))),
            Err(msg) => return Err(err(line_no, format!("{qualified}: {msg}"))),
        }
    }
    if !seen_sections.iter().any(|s| s == "plant") {
        return Err(Error::Config(format!("{origin}: missing required section [plant]")));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}
