//! Trains the three families on the catheter protocol in memory and prints
//! the error table plus loop widths on the 0.45 Hz Mid trajectory.
//!
//! `cargo run --release --example train_compare -- [epochs] [fwd|inv]`
//!
//! The default of 40 epochs takes a few minutes on one core; 500 epochs
//! reproduces the full protocol.

use std::time::Instant;

use hystkin::cli::{protocol_trajectories, Split};
use hystkin::eval::{compare, loop_width, series_loop_width, TestCase};
use hystkin::excitation::{BaselineKind, KinematicSeries};
use hystkin::models::{train_with, Direction};
use hystkin::store::ExperimentConfig;

fn main() -> hystkin::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(40, |a| a.parse().expect("epochs must be an integer"));
    let direction: Direction = args.next().map_or(Ok(Direction::Forward), |a| a.parse())?;

    let cfg = ExperimentConfig::default();
    let trajectories = protocol_trajectories(&cfg)?;
    let train_set: Vec<KinematicSeries> = trajectories
        .iter()
        .filter(|t| t.split == Split::Train)
        .map(|t| t.series.clone())
        .collect();
    let tests: Vec<TestCase> = trajectories
        .into_iter()
        .filter(|t| t.split == Split::Test)
        .map(|t| TestCase {
            freq_hz: t.freq_hz,
            baseline: t.baseline,
            series: t.series,
        })
        .collect();

    let mut train_cfg = cfg.train.train_config(cfg.seed);
    train_cfg.epochs = epochs;
    let kinds: Vec<_> = cfg.eval.kinds.iter().map(|&k| cfg.train.resolve(k)).collect();
    let mut models = Vec::new();
    for &kind in &kinds {
        let start = Instant::now();
        let model = train_with(kind, direction, &train_set, &train_cfg, &mut |_, _| {})?;
        println!(
            "{:<8} {} epochs in {:.1}s, final loss {:.3e}",
            kind.label(),
            epochs,
            start.elapsed().as_secs_f64(),
            model.final_loss().unwrap_or(f64::NAN)
        );
        models.push(model);
    }

    let report = compare(&models, &tests, &[direction], &kinds)?;
    println!("\n{}", report.to_table());

    if direction == Direction::Forward {
        let test = tests
            .iter()
            .find(|t| t.baseline == BaselineKind::Mid && (t.freq_hz - 0.45).abs() < 1e-9)
            .expect("protocol has a 0.45 Hz Mid trajectory");
        println!("loop width, 0.45 Hz Mid: truth {:.3} deg", series_loop_width(&test.series)?);
        for kind in &kinds {
            let cell = report.cell(kind.key(), direction, 0.45, BaselineKind::Mid).expect("cell exists");
            let pred = cell.prediction.as_ref().expect("model was trained");
            println!("  {:<8} {:.3} deg", kind.label(), loop_width(&test.series.q_cmd_mm, pred)?);
        }
    }
    Ok(())
}
