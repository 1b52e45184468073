//! Central-difference gradient check of each network family on a random batch.
//!
//! `cargo run --release --example gradient_check`

use hystkin::models::{Batch, Network, NetworkKind, NetworkObjective};
use hystkin::numcore::{grad_check, prng, GradCheckOptions, Tensor2};

fn batch(kind: NetworkKind) -> hystkin::Result<Batch> {
    let x: Vec<f64> = (0..40).map(|k| 0.5 + 0.4 * (k as f64 * 0.7).sin()).collect();
    let y: Vec<f64> = (0..8).map(|k| 0.3 + 0.05 * k as f64).collect();
    Ok(match kind {
        NetworkKind::Fnn { .. } => Batch::Rows {
            x: Tensor2::from_vec(8, 1, x[..8].to_vec())?,
            y,
        },
        NetworkKind::FnnHib { window, .. } => Batch::Rows {
            x: Tensor2::from_vec(8, window, (0..8 * window).map(|k| x[k % 40]).collect())?,
            y,
        },
        // Time-major: 4 steps of 2 sequences.
        NetworkKind::Lstm { .. } => Batch::Sequences {
            xs: Tensor2::from_vec(8, 1, x[..8].to_vec())?,
            batch: 2,
            y,
            mask: vec![true; 8],
        },
    })
}

fn main() -> hystkin::Result<()> {
    for kind in NetworkKind::defaults(5) {
        let mut net = Network::new(kind, &mut prng(1))?;
        let b = batch(kind)?;
        let report = grad_check(&mut NetworkObjective { net: &mut net, batch: &b }, &GradCheckOptions::default())?;
        println!(
            "{:<28} checked {:>5} of {:>5} params, max rel error {:.2e}, max abs error {:.2e}",
            kind.describe(),
            report.checked,
            report.total,
            report.max_rel_error,
            report.max_abs_error
        );
    }
    Ok(())
}
