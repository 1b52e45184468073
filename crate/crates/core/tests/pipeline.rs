//! The `hystkin` command line end to end on a small protocol.

use std::fs;
use std::path::Path;

use hystkin::cli::run;
use hystkin::store::{load_model, load_series};

const CONFIG: &str = "\
# two short trajectories per split
seed = 3

[plant]
kind = catheter

[excitation]
cycles = 3
baselines = mid
frequencies = 0.3, 0.5
test_frequencies = 0.45

[train]
epochs = 3
window = 10
hidden = 8

[eval]
kinds = fnn, fnn-hib, lstm
directions = fwd, inv

[sweep]
frequencies = 0.2, 0.4
cycles = 3
pretension_mm = 0, 2
trials = 2
";

fn hystkin(config: &Path, out: &Path, args: &[&str]) -> i32 {
    let common = ["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    run(std::iter::once("hystkin").chain(args.iter().copied()).chain(common))
}

fn setup() -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.cfg");
    fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    (dir, config, out)
}

#[test]
fn gen_train_eval_sweep() {
    let (_dir, config, out) = setup();
    assert_eq!(hystkin(&config, &out, &["gen"]), 0);
    let manifest = fs::read_to_string(out.join("data/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 3);
    let test = load_series(&out.join("data/test/mid_f0.45.csv")).unwrap();
    assert_eq!(test.len(), (3.0f64 / 0.45 * 25.0).floor() as usize + 1);

    // Without --kind/--direction every configured model is trained.
    assert_eq!(hystkin(&config, &out, &["train"]), 0);
    for kind in ["fnn", "fnn-hib", "lstm"] {
        for dir in ["fwd", "inv"] {
            let m = load_model(&out.join(format!("models/{kind}_{dir}.model"))).unwrap();
            assert_eq!(m.loss_curve.len(), 3);
            let loss = fs::read_to_string(out.join(format!("models/{kind}_{dir}_loss.csv"))).unwrap();
            assert_eq!(loss.lines().count(), 4);
        }
    }
    assert_eq!(load_model(&out.join("models/fnn-hib_fwd.model")).unwrap().window.length, 10);

    assert_eq!(hystkin(&config, &out, &["eval"]), 0);
    let report = fs::read_to_string(out.join("eval/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 3 * 2);
    assert!(report.starts_with("model,direction,freq_hz,baseline,rmse,nrmse,y_range,n,fnn_ratio"));
    let plot = fs::read_to_string(out.join("eval/plots/lstm_inv_mid_f0.45.csv")).unwrap();
    assert!(plot.starts_with("t_s,q_cmd_mm,theta_deg,pred_q_cmd_mm"));
    assert_eq!(plot.lines().count(), test.len() + 1);

    assert_eq!(hystkin(&config, &out, &["sweep"]), 0);
    assert_eq!(hystkin(&config, &out, &["sweep", "--scenario", "pretension"]), 0);
    let rate = fs::read_to_string(out.join("sweep/rate_dependence.csv")).unwrap();
    assert_eq!(rate.lines().count(), 3);
    let pre = fs::read_to_string(out.join("sweep/pretension.csv")).unwrap();
    assert_eq!(pre.lines().count(), 3);
}

#[test]
fn existing_outputs_need_overwrite() {
    let (_dir, config, out) = setup();
    assert_eq!(hystkin(&config, &out, &["gen"]), 0);
    assert_eq!(hystkin(&config, &out, &["gen"]), 1);
    assert_eq!(hystkin(&config, &out, &["gen", "--overwrite"]), 0);
}

#[test]
fn seed_override_changes_data() {
    let (_dir, config, out) = setup();
    let other = out.with_file_name("other");
    assert_eq!(hystkin(&config, &out, &["gen"]), 0);
    assert_eq!(hystkin(&config, &other, &["gen", "--seed", "4"]), 0);
    let a = fs::read(out.join("data/test/mid_f0.45.csv")).unwrap();
    let b = fs::read(other.join("data/test/mid_f0.45.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn usage_errors_exit_with_one() {
    let (_dir, config, out) = setup();
    assert_eq!(hystkin(&config, &out, &["train", "--kind", "fnn"]), 1, "no data generated yet");
    assert_eq!(hystkin(&config, &out, &["gen"]), 0);
    assert_eq!(hystkin(&config, &out, &["train", "--kind", "rnn"]), 1);
    assert_eq!(hystkin(&config, &out, &["train", "--direction", "up"]), 1);
    assert_eq!(hystkin(&config, &out, &["sweep", "--scenario", "nope"]), 1);
    assert_eq!(hystkin(&out.join("missing.cfg"), &out, &["gen"]), 1);
    assert_eq!(run(["hystkin", "frobnicate"]), 1);
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    fs::write(&config, "[plant]\nkind = catheter\nbogus = 1\n").unwrap();
    let err = hystkin::store::load_config(&config).unwrap_err().to_string();
    assert!(err.contains(":3:"), "{err}");
    assert_eq!(hystkin(&config, &dir.path().join("out"), &["gen"]), 1);
}

#[test]
fn diverging_training_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("hot.cfg");
    fs::write(&config, CONFIG.replace("epochs = 3", "epochs = 3\nlr = 1e300")).unwrap();
    let out = dir.path().join("out");
    assert_eq!(hystkin(&config, &out, &["gen"]), 0);
    assert_eq!(hystkin(&config, &out, &["train", "--kind", "fnn", "--direction", "fwd"]), 2);
}
