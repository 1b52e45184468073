//! Training loops and series prediction.

use crate::error::{Error, Result};
use crate::excitation::KinematicSeries;
use crate::numcore::rng::{derive_seed, shuffle};
use crate::numcore::{adam_step, prng, AdamConfig, Tensor2};

use super::dataset::{make_dataset, Direction};
use super::network::{Batch, Network, NetworkKind};
use super::normalize::{fit_normalizer, NormParams};
use super::window::{make_windows, WindowSpec};

/// Optimisation settings shared by all model families.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Chunk length for truncated backpropagation through time.
    pub subseq_len: usize,
    /// Master seed; initialisation and shuffling use streams derived from it.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 16,
            adam: AdamConfig::default(),
            subseq_len: 50,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidParam("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidParam("batch_size must be at least 1".into()));
        }
        if self.subseq_len < 1 {
            return Err(Error::InvalidParam("subseq_len must be at least 1".into()));
        }
        self.adam.validate()
    }

    /// One-line summary of every setting, stored with trained models.
    pub fn digest(&self) -> String {
        format!(
            "epochs={} batch_size={} lr={:?} beta1={:?} beta2={:?} eps={:?} subseq_len={} seed={}",
            self.epochs,
            self.batch_size,
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps,
            self.subseq_len,
            self.shuffle_seed
        )
    }

    pub(crate) fn init_seed(&self) -> u64 {
        derive_seed(self.shuffle_seed, 1)
    }

    pub(crate) fn order_seed(&self) -> u64 {
        derive_seed(self.shuffle_seed, 2)
    }
}

/// Everything needed to reproduce a model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: NetworkKind,
    pub direction: Direction,
    pub window: WindowSpec,
    pub norm: NormParams,
    pub rate_hz: f64,
    pub config: TrainConfig,
    pub network: Network,
    /// Mean training loss (normalised units) per epoch.
    pub loss_curve: Vec<f64>,
}

impl TrainedModel {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }
}

/// Window spec implied by `kind`. The buffered model uses its own window
/// length; the LSTM's flag prefix uses the default history length.
pub fn window_for(kind: NetworkKind) -> WindowSpec {
    match kind {
        NetworkKind::FnnHib { window, .. } => WindowSpec {
            length: window,
            ..WindowSpec::default()
        },
        _ => WindowSpec::default(),
    }
}

/// Trains `kind` on `series` with default window settings.
pub fn train(kind: NetworkKind, direction: Direction, series: &[KinematicSeries], cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(kind, direction, series, cfg, &mut |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, mean_loss)` after every epoch.
pub fn train_with(
    kind: NetworkKind,
    direction: Direction,
    series: &[KinematicSeries],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<TrainedModel> {
    cfg.validate()?;
    kind.validate()?;
    if series.is_empty() {
        return Err(Error::InvalidParam("training needs at least one series".into()));
    }
    let dataset = make_dataset(series, direction)?;
    let norm = fit_normalizer(&dataset)?;
    let window = window_for(kind);
    window.validate()?;

    let xs: Vec<Vec<f64>> = dataset.sequences.iter().map(|s| norm.apply_x(&s.x)).collect();
    let ys: Vec<Vec<f64>> = dataset.sequences.iter().map(|s| norm.apply_y(&s.y)).collect();

    let mut network = Network::new(kind, &mut prng(cfg.init_seed()))?;
    let mut adam = cfg.adam.clone();
    adam.step_count = 0;
    let mut order_rng = prng(cfg.order_seed());
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    match kind {
        NetworkKind::Fnn { .. } | NetworkKind::FnnHib { .. } => {
            let (inputs, targets) = row_samples(kind, &xs, &ys, &window)?;
            let width = inputs.cols();
            let mut order: Vec<usize> = (0..inputs.rows()).collect();
            for epoch in 0..cfg.epochs {
                shuffle(&mut order_rng, &mut order);
                let mut total = 0.0;
                for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
                    let mut x = Vec::with_capacity(idx.len() * width);
                    let mut y = Vec::with_capacity(idx.len());
                    for &i in idx {
                        x.extend_from_slice(inputs.row_slice(i));
                        y.push(targets[i]);
                    }
                    let batch = Batch::Rows {
                        x: Tensor2::from_vec(idx.len(), width, x)?,
                        y,
                    };
                    let loss = optimise(&mut network, &batch, &mut adam, epoch, bi)?;
                    total += loss * idx.len() as f64;
                }
                let mean = total / order.len() as f64;
                loss_curve.push(mean);
                on_epoch(epoch, mean);
            }
        }
        NetworkKind::Lstm { .. } => {
            let padded: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| flag_prefixed(x, y, &window))
                .collect();
            let len = cfg.subseq_len;
            for epoch in 0..cfg.epochs {
                let mut chunks = Vec::new();
                for (si, (_, _, mask)) in padded.iter().enumerate() {
                    let offset = (rand::Rng::random::<u64>(&mut order_rng) % len as u64) as usize;
                    let mut start = 0;
                    let mut end = if offset == 0 { len } else { offset }.min(mask.len());
                    while start < mask.len() {
                        if mask[start..end].iter().any(|&m| m) {
                            chunks.push((si, start, end));
                        }
                        start = end;
                        end = (end + len).min(mask.len());
                    }
                }
                shuffle(&mut order_rng, &mut chunks);
                let mut total = 0.0;
                let mut counted = 0usize;
                for (bi, group) in chunks.chunks(cfg.batch_size).enumerate() {
                    let batch = sequence_batch(group, &padded, len, window.flag_value)?;
                    let valid = match &batch {
                        Batch::Sequences { mask, .. } => mask.iter().filter(|&&m| m).count(),
                        Batch::Rows { .. } => unreachable!(),
                    };
                    let loss = optimise(&mut network, &batch, &mut adam, epoch, bi)?;
                    total += loss * valid as f64;
                    counted += valid;
                }
                let mean = total / counted as f64;
                loss_curve.push(mean);
                on_epoch(epoch, mean);
            }
        }
    }

    // Optimiser moments belong to the training run, not to the model.
    for p in network.params_mut() {
        p.m.fill(0.0);
        p.v.fill(0.0);
        p.zero_grad();
    }
    Ok(TrainedModel {
        kind,
        direction,
        window,
        norm,
        rate_hz: dataset.rate_hz,
        config: cfg.clone(),
        network,
        loss_curve,
    })
}

fn optimise(network: &mut Network, batch: &Batch, adam: &mut AdamConfig, epoch: usize, bi: usize) -> Result<f64> {
    let diverged = |msg: String| Error::Diverged { epoch, batch: bi, msg };
    let loss = network.batch_loss(batch, true)?;
    if !loss.is_finite() {
        return Err(diverged(format!("loss is {loss}")));
    }
    let mut params = network.params_mut();
    adam_step(&mut params, adam).map_err(|e| match e {
        Error::NonFinite(msg) => diverged(msg),
        other => other,
    })?;
    Ok(loss)
}

/// Inputs (one row per sample) and targets for the feedforward families.
fn row_samples(kind: NetworkKind, xs: &[Vec<f64>], ys: &[Vec<f64>], window: &WindowSpec) -> Result<(Tensor2, Vec<f64>)> {
    let targets: Vec<f64> = ys.iter().flatten().copied().collect();
    let inputs = match kind {
        NetworkKind::Fnn { .. } => Tensor2::from_vec(targets.len(), 1, xs.iter().flatten().copied().collect())?,
        _ => {
            let mut data = Vec::with_capacity(targets.len() * window.length);
            for x in xs {
                data.extend(make_windows(x, window).into_vec());
            }
            Tensor2::from_vec(targets.len(), window.length, data)?
        }
    };
    Ok((inputs, targets))
}

/// A trajectory with `length - 1` flags in front; flag steps carry no target.
fn flag_prefixed(x: &[f64], y: &[f64], window: &WindowSpec) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let pad = window.length - 1;
    let xp = window.padded(x);
    let mut yp = vec![0.0; pad];
    yp.extend_from_slice(y);
    let mut mask = vec![false; pad];
    mask.resize(pad + y.len(), true);
    (xp, yp, mask)
}

/// Packs chunks `(sequence, start, end)` into a time-major batch of `len` steps.
/// Short chunks are padded at the end with masked flag steps.
fn sequence_batch(
    group: &[(usize, usize, usize)],
    padded: &[(Vec<f64>, Vec<f64>, Vec<bool>)],
    len: usize,
    flag: f64,
) -> Result<Batch> {
    let b = group.len();
    let mut xs = vec![flag; len * b];
    let mut y = vec![0.0; len * b];
    let mut mask = vec![false; len * b];
    for (j, &(si, start, end)) in group.iter().enumerate() {
        let (px, py, pm) = &padded[si];
        for (t, k) in (start..end).enumerate() {
            xs[t * b + j] = px[k];
            y[t * b + j] = py[k];
            mask[t * b + j] = pm[k];
        }
    }
    Ok(Batch::Sequences {
        xs: Tensor2::from_vec(len * b, 1, xs)?,
        batch: b,
        y,
        mask,
    })
}

/// Runs `model` over an input series given in source units and returns the
/// output series in source units, one value per input sample.
pub fn predict_series(model: &TrainedModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidParam("cannot predict an empty series".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prediction input contains non-finite values".into()));
    }
    let u = model.norm.apply_x(x);
    let out = match (&model.network, model.kind) {
        (Network::Mlp(m), NetworkKind::Fnn { .. }) => m.predict(&Tensor2::from_vec(u.len(), 1, u)?)?,
        (Network::Mlp(m), NetworkKind::FnnHib { .. }) => m.predict(&make_windows(&u, &model.window))?,
        (Network::Lstm(l), NetworkKind::Lstm { .. }) => {
            let padded = model.window.padded(&u);
            let n = padded.len();
            let full = l.predict(&Tensor2::from_vec(n, 1, padded)?, 1)?;
            full.rows_range(n - u.len(), n)
        }
        _ => {
            return Err(Error::ModelFormat(format!(
                "parameters do not match model kind {}",
                model.kind.describe()
            )))
        }
    };
    Ok(model.norm.invert_y(out.data()))
}

/// Predicts the model's output channel for a whole series, reading the input
/// channel its direction requires.
pub fn predict_for(model: &TrainedModel, series: &KinematicSeries) -> Result<Vec<f64>> {
    let (input, _) = model.direction.channels();
    predict_series(model, series.require(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excitation::{baseline_preset, sample, BaselineKind};
    use crate::plant::{simulate, LinearPlant, Plant};

    fn linear_series(f: f64) -> KinematicSeries {
        let spec = baseline_preset(BaselineKind::Mid, f, 3.0, 2.0).unwrap();
        let cmd = sample(&spec, 25.0).unwrap();
        simulate(&Plant::Linear(LinearPlant::default()).noiseless(), &cmd.q_cmd_mm, cmd.dt_s).unwrap()
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            shuffle_seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_curve_has_one_entry_per_epoch_and_is_reproducible() {
        let data = [linear_series(0.5)];
        for kind in NetworkKind::defaults(5) {
            let a = train(kind, Direction::Forward, &data, &quick(3)).unwrap();
            let b = train(kind, Direction::Forward, &data, &quick(3)).unwrap();
            assert_eq!(a.loss_curve.len(), 3);
            assert_eq!(a.loss_curve, b.loss_curve);
            assert_eq!(a.network, b.network);
        }
    }

    #[test]
    fn prediction_length_matches_input() {
        let data = [linear_series(0.5)];
        for kind in NetworkKind::defaults(5) {
            let m = train(kind, Direction::Inverse, &data, &quick(1)).unwrap();
            let theta = data[0].theta_deg.as_ref().unwrap();
            assert_eq!(predict_series(&m, &theta[..17]).unwrap().len(), 17);
        }
    }

    #[test]
    fn fnn_is_memoryless() {
        let data = [linear_series(0.5)];
        let m = train(NetworkKind::fnn(), Direction::Forward, &data, &quick(2)).unwrap();
        let x = [0.5, 1.0, 4.0, 2.5];
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let a = predict_series(&m, &x).unwrap();
        let b = predict_series(&m, &rev).unwrap();
        let b_back: Vec<f64> = b.iter().rev().copied().collect();
        assert_eq!(a, b_back);
        let c = predict_series(&m, &[2.0; 5]).unwrap();
        assert!(c.iter().all(|&v| v == c[0]));
    }

    #[test]
    fn training_reduces_loss() {
        let data = [linear_series(0.5)];
        let m = train(NetworkKind::fnn(), Direction::Forward, &data, &quick(40)).unwrap();
        assert!(m.final_loss().unwrap() < 0.2 * m.loss_curve[0]);
    }

    #[test]
    fn rejects_empty_training_set() {
        assert!(train(NetworkKind::fnn(), Direction::Forward, &[], &quick(1)).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let data = [linear_series(0.5)];
        let cfg = TrainConfig {
            batch_size: 0,
            ..quick(1)
        };
        assert!(train(NetworkKind::fnn(), Direction::Forward, &data, &cfg).is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let data = [linear_series(0.5)];
        let mut cfg = quick(3);
        cfg.adam.lr = 1e300;
        match train(NetworkKind::fnn(), Direction::Forward, &data, &cfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn chunking_covers_every_target_once() {
        let window = WindowSpec {
            length: 4,
            flag_value: -1.0,
        };
        let (x, y, mask) = flag_prefixed(&[0.1, 0.2, 0.3], &[1.0, 2.0, 3.0], &window);
        assert_eq!(x, vec![-1.0, -1.0, -1.0, 0.1, 0.2, 0.3]);
        assert_eq!(y[3..], [1.0, 2.0, 3.0]);
        assert_eq!(mask, vec![false, false, false, true, true, true]);
        let padded = vec![(x, y, mask)];
        let batch = sequence_batch(&[(0, 0, 2), (0, 2, 6)], &padded, 4, -1.0).unwrap();
        if let Batch::Sequences { xs, batch, mask, .. } = batch {
            assert_eq!(batch, 2);
            assert_eq!(xs.data(), &[-1.0, -1.0, -1.0, 0.1, -1.0, 0.2, -1.0, 0.3]);
            assert_eq!(mask.iter().filter(|&&m| m).count(), 3);
        } else {
            panic!("expected a sequence batch");
        }
    }
}
