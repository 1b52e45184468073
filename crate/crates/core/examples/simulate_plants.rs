//! Drives the three synthetic plants with the same command and compares
//! their tip-angle ranges and hysteresis loop widths.
//!
//! `cargo run --release --example simulate_plants`

use hystkin::eval::{loop_width, series_loop_width};
use hystkin::excitation::{baseline_preset, sample, BaselineKind, Channel};
use hystkin::plant::{simulate, BoucWenTensionPlant, CatheterPlant, LinearPlant, Plant};

fn main() -> hystkin::Result<()> {
    let cmd = sample(&baseline_preset(BaselineKind::Mid, 0.45, 3.0, 12.0)?, 25.0)?;
    let plants = [
        Plant::Linear(LinearPlant::default()),
        Plant::BoucWenTension(BoucWenTensionPlant::default()),
        Plant::Catheter(CatheterPlant::default()),
    ];
    println!("{:<17} {:>16} {:>16} {:>16}", "plant", "theta range", "width vs cmd", "width vs actual");
    for plant in plants {
        let s = simulate(&plant.noiseless(), &cmd.q_cmd_mm, cmd.dt_s)?;
        let theta = s.require(Channel::Theta)?;
        let (lo, hi) = theta.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let vs_act = loop_width(s.require(Channel::QAct)?, theta)?;
        println!(
            "{:<17} {:>12.2} deg {:>12.3} deg {:>12.3} deg",
            plant.name(),
            hi - lo,
            series_loop_width(&s)?,
            vs_act
        );
    }
    Ok(())
}
