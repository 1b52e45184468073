//! Rate dependence of the catheter plant and the pretension trade-off.
//!
//! `cargo run --release --example sweep_scenarios`

use hystkin::cli::sweep::{pretension, pretension_table, rate_dependence, rate_table};
use hystkin::store::ExperimentConfig;

fn main() -> hystkin::Result<()> {
    let cfg = ExperimentConfig::default();
    println!("Rate dependence ({} cycles per frequency):", cfg.sweep.cycles);
    print!("{}", rate_table(&rate_dependence(&cfg)?));
    println!();
    println!("Pretension ({} trials per level):", cfg.sweep.trials);
    print!("{}", pretension_table(&pretension(&cfg)?));
    Ok(())
}
