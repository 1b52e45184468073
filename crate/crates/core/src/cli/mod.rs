//! Pipeline commands behind the `hystkin` binary.
//!
//! Output layout under the configured `out_dir`:
//!
//! ```text
//! data/manifest.csv               split,baseline,freq_hz,samples,file
//! data/train/<baseline>_f<freq>.csv
//! data/test/<baseline>_f<freq>.csv
//! models/<kind>_<dir>.model
//! models/<kind>_<dir>_loss.csv
//! eval/report.txt, eval/report.csv
//! eval/plots/<kind>_<dir>_<baseline>_f<freq>.csv
//! sweep/rate_dependence.{txt,csv}, sweep/pretension.{txt,csv}
//! ```

pub mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{compare, EvalReport, TestCase};
use crate::excitation::{baseline_preset, sample, BaselineKind, KinematicSeries};
use crate::models::{train_with, Direction, NetworkKind, TrainedModel};
use crate::numcore::rng::derive_seed;
use crate::plant::simulate;
use crate::store::{config_reference, load_config, load_model, load_series, save_model, save_series, ExperimentConfig};

/// Which half of the protocol a trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn key(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One generated trajectory and its labels.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub split: Split,
    pub baseline: BaselineKind,
    pub freq_hz: f64,
    pub series: KinematicSeries,
}

impl Trajectory {
    pub fn file_name(&self) -> String {
        format!("{}_f{:.2}.csv", self.baseline.key(), self.freq_hz)
    }
}

/// Simulates every training and test trajectory described by `cfg`, in
/// manifest order. Each trajectory draws its noise from its own stream.
pub fn protocol_trajectories(cfg: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    let e = &cfg.excitation;
    let mut out = Vec::new();
    let mut stream = 0u64;
    for (split, freqs) in [(Split::Train, &e.frequencies), (Split::Test, &e.test_frequencies)] {
        for &baseline in &e.baselines {
            for &f in freqs.iter() {
                let spec = baseline_preset(baseline, f, e.q_max_mm, e.cycles)?;
                let cmd = sample(&spec, e.rate_hz)?;
                let plant = cfg.plant.build(derive_seed(cfg.seed, stream))?;
                stream += 1;
                out.push(Trajectory {
                    split,
                    baseline,
                    freq_hz: f,
                    series: simulate(&plant, &cmd.q_cmd_mm, cmd.dt_s)?,
                });
            }
        }
    }
    Ok(out)
}

/// Entry of the dataset manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub split: Split,
    pub baseline: BaselineKind,
    pub freq_hz: f64,
    pub samples: usize,
    pub path: PathBuf,
}

fn data_dir(cfg: &ExperimentConfig, split: Split) -> PathBuf {
    cfg.out_dir.join("data").join(split.key())
}

pub fn model_path(cfg: &ExperimentConfig, kind: NetworkKind, direction: Direction) -> PathBuf {
    cfg.out_dir.join("models").join(format!("{}_{}.model", kind.key(), direction.key()))
}

fn loss_path(cfg: &ExperimentConfig, kind: NetworkKind, direction: Direction) -> PathBuf {
    cfg.out_dir.join("models").join(format!("{}_{}_loss.csv", kind.key(), direction.key()))
}

fn guard(paths: &[PathBuf], overwrite: bool) -> Result<()> {
    if overwrite {
        return Ok(());
    }
    if let Some(p) = paths.iter().find(|p| p.exists()) {
        return Err(Error::Config(format!(
            "{} already exists; pass --overwrite to replace it",
            p.display()
        )));
    }
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one file per trajectory plus `data/manifest.csv`.
pub fn cmd_gen(cfg: &ExperimentConfig, overwrite: bool) -> Result<Vec<ManifestEntry>> {
    let trajectories = protocol_trajectories(cfg)?;
    let entries: Vec<ManifestEntry> = trajectories
        .iter()
        .map(|t| ManifestEntry {
            split: t.split,
            baseline: t.baseline,
            freq_hz: t.freq_hz,
            samples: t.series.len(),
            path: data_dir(cfg, t.split).join(t.file_name()),
        })
        .collect();
    let manifest = cfg.out_dir.join("data").join("manifest.csv");
    let mut targets: Vec<PathBuf> = entries.iter().map(|e| e.path.clone()).collect();
    targets.push(manifest.clone());
    guard(&targets, overwrite)?;
    for split in [Split::Train, Split::Test] {
        create_dir(&data_dir(cfg, split))?;
    }
    let mut text = String::from("split,baseline,freq_hz,samples,file\n");
    for (t, e) in trajectories.iter().zip(&entries) {
        save_series(&e.path, &t.series)?;
        let _ = writeln!(
            text,
            "{},{},{:?},{},{}/{}",
            e.split.key(),
            e.baseline.key(),
            e.freq_hz,
            e.samples,
            e.split.key(),
            t.file_name()
        );
    }
    write_text(&manifest, &text)?;
    Ok(entries)
}

/// Reads the generated files of one split in manifest order.
pub fn load_split(cfg: &ExperimentConfig, split: Split) -> Result<Vec<Trajectory>> {
    let e = &cfg.excitation;
    let freqs = match split {
        Split::Train => &e.frequencies,
        Split::Test => &e.test_frequencies,
    };
    let mut out = Vec::new();
    for &baseline in &e.baselines {
        for &f in freqs {
            let mut t = Trajectory {
                split,
                baseline,
                freq_hz: f,
                series: KinematicSeries::from_command(1.0, 0.0, vec![0.0, 0.0])?,
            };
            let path = data_dir(cfg, split).join(t.file_name());
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{} is missing; run `hystkin gen` with this config first",
                    path.display()
                )));
            }
            t.series = load_series(&path)?;
            out.push(t);
        }
    }
    Ok(out)
}

/// Trains one model on the generated training files and writes the model and
/// its loss curve. `on_epoch` receives `(epoch, mean loss)`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    family: NetworkKind,
    direction: Direction,
    overwrite: bool,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<TrainedModel> {
    let kind = cfg.train.resolve(family);
    let model_file = model_path(cfg, kind, direction);
    let loss_file = loss_path(cfg, kind, direction);
    guard(&[model_file.clone(), loss_file.clone()], overwrite)?;
    let series: Vec<KinematicSeries> = load_split(cfg, Split::Train)?.into_iter().map(|t| t.series).collect();
    let model = train_with(kind, direction, &series, &cfg.train.train_config(cfg.seed), on_epoch)?;
    create_dir(model_file.parent().expect("model path has a parent"))?;
    save_model(&model_file, &model)?;
    let mut text = String::from("epoch,loss\n");
    for (i, l) in model.loss_curve.iter().enumerate() {
        let _ = writeln!(text, "{},{l:?}", i + 1);
    }
    write_text(&loss_file, &text)?;
    Ok(model)
}

/// Plot-ready columns for one evaluated cell.
pub fn plot_csv(test: &KinematicSeries, direction: Direction, prediction: &[f64]) -> Result<String> {
    let theta = test.require(crate::excitation::Channel::Theta)?;
    let pred_name = match direction {
        Direction::Forward => "pred_theta_deg",
        Direction::Inverse => "pred_q_cmd_mm",
    };
    let mut out = format!("t_s,q_cmd_mm,theta_deg,{pred_name}\n");
    for k in 0..test.len() {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?}", test.time(k), test.q_cmd_mm[k], theta[k], prediction[k]);
    }
    Ok(out)
}

/// Evaluates every saved model on the generated test files. Models that do
/// not exist are reported as missing cells.
pub fn cmd_eval(cfg: &ExperimentConfig, overwrite: bool) -> Result<EvalReport> {
    let eval_dir = cfg.out_dir.join("eval");
    let plots = eval_dir.join("plots");
    let report_txt = eval_dir.join("report.txt");
    let report_csv = eval_dir.join("report.csv");
    let tests: Vec<TestCase> = load_split(cfg, Split::Test)?
        .into_iter()
        .map(|t| TestCase {
            freq_hz: t.freq_hz,
            baseline: t.baseline,
            series: t.series,
        })
        .collect();
    let kinds: Vec<NetworkKind> = cfg.eval.kinds.iter().map(|&k| cfg.train.resolve(k)).collect();
    let mut models = Vec::new();
    for &direction in &cfg.eval.directions {
        for &kind in &kinds {
            let path = model_path(cfg, kind, direction);
            if path.exists() {
                let m = load_model(&path)?;
                if m.direction != direction || m.kind != kind {
                    return Err(Error::ModelFormat(format!(
                        "{} holds {} {}, expected {} {}",
                        path.display(),
                        m.kind.describe(),
                        m.direction.key(),
                        kind.describe(),
                        direction.key()
                    )));
                }
                models.push(m);
            }
        }
    }
    let report = compare(&models, &tests, &cfg.eval.directions, &kinds)?;

    let mut targets = vec![report_txt.clone(), report_csv.clone()];
    let plot_files: Vec<(PathBuf, usize)> = report
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.prediction.is_some() && cfg.eval.plot_data)
        .map(|(i, c)| {
            let name = format!("{}_{}_{}_f{:.2}.csv", c.kind.key(), c.direction.key(), c.baseline.key(), c.freq_hz);
            (plots.join(name), i)
        })
        .collect();
    targets.extend(plot_files.iter().map(|(p, _)| p.clone()));
    guard(&targets, overwrite)?;
    create_dir(&plots)?;
    write_text(&report_txt, &report.to_table())?;
    write_text(&report_csv, &report.to_csv())?;
    for (path, i) in &plot_files {
        let cell = &report.cells[*i];
        let test = tests
            .iter()
            .find(|t| t.baseline == cell.baseline && t.freq_hz == cell.freq_hz)
            .expect("cell comes from a test case");
        let pred = cell.prediction.as_ref().expect("filtered on prediction");
        write_text(path, &plot_csv(&test.series, cell.direction, pred)?)?;
    }
    Ok(report)
}

/// The two scenario sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    RateDependence,
    Pretension,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate-dependence" | "rate" => Ok(Scenario::RateDependence),
            "pretension" | "pretension-sweep" => Ok(Scenario::Pretension),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected rate-dependence or pretension)"
            ))),
        }
    }
}

/// Runs a scenario, writes its table and CSV under `sweep/`, and returns the table.
pub fn cmd_sweep(cfg: &ExperimentConfig, scenario: Scenario, overwrite: bool) -> Result<String> {
    let dir = cfg.out_dir.join("sweep");
    let (stem, table, csv) = match scenario {
        Scenario::RateDependence => {
            let rows = sweep::rate_dependence(cfg)?;
            ("rate_dependence", sweep::rate_table(&rows), sweep::rate_csv(&rows))
        }
        Scenario::Pretension => {
            let rows = sweep::pretension(cfg)?;
            ("pretension", sweep::pretension_table(&rows), sweep::pretension_csv(&rows))
        }
    };
    let txt = dir.join(format!("{stem}.txt"));
    let csv_path = dir.join(format!("{stem}.csv"));
    guard(&[txt.clone(), csv_path.clone()], overwrite)?;
    create_dir(&dir)?;
    write_text(&txt, &table)?;
    write_text(&csv_path, &csv)?;
    Ok(table)
}

#[derive(Debug, Parser)]
#[command(
    name = "hystkin",
    version,
    about = "Generate hysteresis datasets, train FNN / FNN-HIB / LSTM models and compare them",
    after_help = config_reference()
)]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace existing output files.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the training and test trajectories.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model, or every configured model when --kind/--direction are omitted.
    Train {
        #[command(flatten)]
        common: Common,
        /// fnn | fnn-hib | lstm
        #[arg(long)]
        kind: Option<String>,
        /// fwd | inv
        #[arg(long)]
        direction: Option<String>,
    },
    /// Compare the trained models on the test trajectories.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// rate-dependence | pretension
        #[arg(long, default_value = "rate-dependence")]
        scenario: String,
    },
}

fn load_with_overrides(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs a parsed command, printing results to stdout.
pub fn execute(args: Args) -> Result<()> {
    match args.command {
        Command::Gen { common } => {
            let cfg = load_with_overrides(&common)?;
            let entries = cmd_gen(&cfg, common.overwrite)?;
            println!("split  baseline  freq_hz  samples  file");
            for e in &entries {
                println!(
                    "{:<6} {:<9} {:>7.2} {:>8}  {}",
                    e.split.key(),
                    e.baseline.key(),
                    e.freq_hz,
                    e.samples,
                    e.path.display()
                );
            }
        }
        Command::Train {
            common,
            kind,
            direction,
        } => {
            let cfg = load_with_overrides(&common)?;
            let kinds: Vec<NetworkKind> = match kind {
                Some(k) => vec![k.parse()?],
                None => cfg.eval.kinds.clone(),
            };
            let directions: Vec<Direction> = match direction {
                Some(d) => vec![d.parse()?],
                None => cfg.eval.directions.clone(),
            };
            for &d in &directions {
                for &k in &kinds {
                    let label = format!("{} {}", k.key(), d.key());
                    let every = (cfg.train.epochs / 10).max(1);
                    let m = cmd_train(&cfg, k, d, common.overwrite, &mut |e, l| {
                        if (e + 1) % every == 0 {
                            eprintln!("{label}: epoch {} loss {l:.4e}", e + 1);
                        }
                    })?;
                    println!(
                        "{label}: {} parameters, final loss {:.4e} -> {}",
                        m.network.param_count(),
                        m.final_loss().unwrap_or(f64::NAN),
                        model_path(&cfg, m.kind, d).display()
                    );
                }
            }
        }
        Command::Eval { common } => {
            let cfg = load_with_overrides(&common)?;
            let report = cmd_eval(&cfg, common.overwrite)?;
            print!("{}", report.to_table());
            for c in report.missing() {
                eprintln!(
                    "missing model for {} {} ({} at {} Hz)",
                    c.kind.key(),
                    c.direction.key(),
                    c.baseline,
                    c.freq_hz
                );
            }
        }
        Command::Sweep { common, scenario } => {
            let cfg = load_with_overrides(&common)?;
            print!("{}", cmd_sweep(&cfg, scenario.parse()?, common.overwrite)?);
        }
    }
    Ok(())
}

/// Exit status for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

/// Parses `argv`, runs the command, and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
