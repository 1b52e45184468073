//! Trains a small model, writes it to disk, reads it back and shows that the
//! loaded model predicts identically.
//!
//! `cargo run --release --example model_files`

use hystkin::excitation::{baseline_preset, sample, BaselineKind};
use hystkin::models::{predict_series, train, Direction, NetworkKind, TrainConfig};
use hystkin::plant::{simulate, CatheterPlant, Plant};
use hystkin::store::{load_model, save_model};

fn main() -> hystkin::Result<()> {
    let cmd = sample(&baseline_preset(BaselineKind::Zero, 0.3, 3.0, 12.0)?, 25.0)?;
    let s = simulate(&Plant::Catheter(CatheterPlant::default()), &cmd.q_cmd_mm, cmd.dt_s)?;
    let cfg = TrainConfig {
        epochs: 10,
        shuffle_seed: 11,
        ..TrainConfig::default()
    };
    let model = train(NetworkKind::fnn_hib(20), Direction::Inverse, &[s.clone()], &cfg)?;

    let dir = tempfile::tempdir().expect("temporary directory");
    let path = dir.path().join("hib_inv.model");
    save_model(&path, &model)?;
    let text = std::fs::read_to_string(&path).expect("model file was written");
    println!("{} ({} bytes), header:", path.display(), text.len());
    for line in text.lines().take(8) {
        println!("  {line}");
    }

    let loaded = load_model(&path)?;
    let theta = s.theta_deg.as_ref().expect("plant output");
    let same = predict_series(&loaded, theta)? == predict_series(&model, theta)?;
    println!("reloaded predictions identical: {same}");
    Ok(())
}
