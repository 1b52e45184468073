#![allow(dead_code)]

use hystkin::models::{Batch, Network, NetworkKind, NetworkObjective};
use hystkin::numcore::rng::uniform_sym;
use hystkin::numcore::{grad_check, prng, GradCheckOptions, GradCheckReport, Tensor2};

/// A random batch shaped for `kind`: 8 rows for the feedforward families,
/// 3 sequences of 5 steps for the LSTM.
pub fn random_batch(kind: NetworkKind, seed: u64) -> Batch {
    let mut rng = prng(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| 0.5 + uniform_sym(&mut rng, 0.5)).collect() };
    match kind {
        NetworkKind::Fnn { .. } => Batch::Rows {
            x: Tensor2::from_vec(8, 1, draw(8)).unwrap(),
            y: draw(8),
        },
        NetworkKind::FnnHib { window, .. } => {
            let mut x = draw(8 * window);
            // Flag-padded starts, as produced for the first samples of a trajectory.
            for v in x.iter_mut().take(window / 2) {
                *v = -1.0;
            }
            Batch::Rows {
                x: Tensor2::from_vec(8, window, x).unwrap(),
                y: draw(8),
            }
        }
        NetworkKind::Lstm { .. } => {
            let (steps, batch) = (5, 3);
            let mut mask = vec![true; steps * batch];
            mask[0] = false;
            Batch::Sequences {
                xs: Tensor2::from_vec(steps * batch, 1, draw(steps * batch)).unwrap(),
                batch,
                y: draw(steps * batch),
                mask,
            }
        }
    }
}

/// Central-difference check of a freshly initialised network of `kind`.
pub fn check_network(kind: NetworkKind, seed: u64) -> GradCheckReport {
    let mut net = Network::new(kind, &mut prng(seed)).unwrap();
    let batch = random_batch(kind, seed + 1);
    let mut objective = NetworkObjective { net: &mut net, batch: &batch };
    grad_check(&mut objective, &GradCheckOptions::default()).unwrap()
}
