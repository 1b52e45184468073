use proptest::prelude::*;

use hystkin::eval::{loop_width, rmse_nrmse};
use hystkin::excitation::KinematicSeries;
use hystkin::models::{make_windows, Network, NetworkKind, NormParams, WindowSpec};
use hystkin::numcore::{prng, Tensor2};
use hystkin::plant::{bouc_wen_step, simulate, BoucWenParams, LinearPlant, Plant};
use hystkin::store::{series_from_csv, series_to_csv};

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_round_trips(x in finite(-50.0, 50.0), lo in finite(-10.0, 0.0), span in finite(0.1, 20.0)) {
        let n = NormParams { x_min: lo, x_max: lo + span, y_min: lo, y_max: lo + span };
        let back = n.x_from_unit(n.x_to_unit(x));
        prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        // Affine extension: values outside the training range are not clipped.
        if x > lo + span {
            prop_assert!(n.x_to_unit(x) > 1.0);
        }
    }

    #[test]
    fn rmse_is_symmetric_and_nrmse_scale_free(
        truth in prop::collection::vec(finite(-10.0, 10.0), 3..40),
        noise in prop::collection::vec(finite(-1.0, 1.0), 40),
        scale in finite(0.1, 100.0),
        shift in finite(-50.0, 50.0),
    ) {
        let (lo, hi) = truth.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        prop_assume!(hi - lo > 1e-3);
        let pred: Vec<f64> = truth.iter().zip(&noise).map(|(t, e)| t + e).collect();
        let a = rmse_nrmse(&pred, &truth).unwrap();
        // Same residuals; only the range reference differs.
        let b = rmse_nrmse(&truth, &pred);
        if let Ok(b) = b {
            prop_assert!((a.rmse - b.rmse).abs() < 1e-12);
        }
        let map = |v: &Vec<f64>| -> Vec<f64> { v.iter().map(|x| scale * x + shift).collect() };
        let s = rmse_nrmse(&map(&pred), &map(&truth)).unwrap();
        prop_assert!((s.nrmse - a.nrmse).abs() <= 1e-9 * a.nrmse.max(1e-12));
        prop_assert!((s.rmse - scale * a.rmse).abs() <= 1e-9 * (scale * a.rmse).max(1e-12));
    }

    #[test]
    fn bouc_wen_state_stays_bounded(steps in prop::collection::vec(finite(-2.0, 2.0), 1..200)) {
        let p = BoucWenParams::default();
        let bound = p.z_bound();
        let (mut z, mut q) = (0.0, 0.0);
        for dq in steps {
            z = bouc_wen_step(z, q + dq, q, &p, 1e-3).unwrap();
            q += dq;
            prop_assert!(z.abs() <= bound + 1e-3, "z = {z}, bound = {bound}");
        }
    }

    #[test]
    fn series_files_round_trip(values in prop::collection::vec(finite(-1e6, 1e6), 2..60), dt in finite(1e-3, 1.0)) {
        let s = KinematicSeries {
            dt_s: dt,
            t0_s: 0.0,
            theta_deg: Some(values.iter().map(|v| v * 1.7).collect()),
            q_act_mm: None,
            tension_n: Some(values.iter().map(|v| -v).collect()),
            q_cmd_mm: values,
        };
        let text = series_to_csv(&s).unwrap();
        let back = series_from_csv(&text, "mem").unwrap();
        prop_assert_eq!(&back.q_cmd_mm, &s.q_cmd_mm);
        prop_assert_eq!(&back.theta_deg, &s.theta_deg);
        prop_assert_eq!(&back.tension_n, &s.tension_n);
        prop_assert_eq!(back.q_act_mm, None);
    }

    #[test]
    fn windows_end_at_their_sample(x in prop::collection::vec(finite(0.0, 1.0), 1..30), l in 1usize..12) {
        let spec = WindowSpec { length: l, flag_value: -1.0 };
        let w = make_windows(&x, &spec);
        prop_assert_eq!(w.shape(), (x.len(), l));
        for k in 0..x.len() {
            let row = w.row_slice(k);
            prop_assert_eq!(row[l - 1], x[k]);
            let flags = row.iter().filter(|&&v| v == -1.0).count();
            prop_assert_eq!(flags, (l - 1).saturating_sub(k));
        }
    }

    #[test]
    fn linear_plant_is_memoryless(a in prop::collection::vec(finite(0.0, 6.0), 2..20), b in prop::collection::vec(finite(0.0, 6.0), 2..20)) {
        let plant = Plant::Linear(LinearPlant::default()).noiseless();
        let whole: Vec<f64> = a.iter().chain(&b).copied().collect();
        let joined = simulate(&plant, &whole, 0.04).unwrap();
        let sa = simulate(&plant, &a, 0.04).unwrap();
        let sb = simulate(&plant, &b, 0.04).unwrap();
        let parts: Vec<f64> = sa.theta_deg.unwrap().into_iter().chain(sb.theta_deg.unwrap()).collect();
        prop_assert_eq!(joined.theta_deg.unwrap(), parts);
    }

    #[test]
    fn memoryless_output_has_zero_loop_width(amps in prop::collection::vec(finite(1.0, 6.0), 2..6)) {
        let mut q = vec![0.0];
        for amp in amps {
            for k in 1..=30 { q.push(amp * k as f64 / 30.0); }
            for k in (0..30).rev() { q.push(amp * k as f64 / 30.0); }
        }
        let plant = Plant::Linear(LinearPlant::default()).noiseless();
        let s = simulate(&plant, &q, 0.04).unwrap();
        let w = loop_width(&q, s.theta_deg.as_ref().unwrap()).unwrap();
        prop_assert!(w < 1e-9, "{w}");
    }
}

fn permuted_history_invariant(net: &Network, kind: NetworkKind) {
    let history = [0.1, 0.9, 0.4, 0.7, 0.3];
    let mut other = history;
    other.reverse();
    let last = 0.55;
    let run = |h: &[f64]| -> f64 {
        let mut xs = h.to_vec();
        xs.push(last);
        match (net, kind) {
            (Network::Mlp(m), NetworkKind::FnnHib { window, .. }) => {
                let w = make_windows(&xs, &WindowSpec { length: window, flag_value: -1.0 });
                let out = m.predict(&w).unwrap();
                out.data()[xs.len() - 1]
            }
            (Network::Lstm(l), _) => {
                let out = l.predict(&Tensor2::from_vec(xs.len(), 1, xs.clone()).unwrap(), 1).unwrap();
                out.data()[xs.len() - 1]
            }
            _ => unreachable!(),
        }
    };
    assert_eq!(run(&history), run(&other));
}

#[test]
fn single_sample_buffer_is_memoryless() {
    let kind = NetworkKind::fnn_hib(1);
    let net = Network::new(kind, &mut prng(5)).unwrap();
    permuted_history_invariant(&net, kind);
}

#[test]
fn lstm_without_recurrence_is_memoryless() {
    let kind = NetworkKind::lstm();
    let mut net = Network::new(kind, &mut prng(6)).unwrap();
    if let Network::Lstm(l) = &mut net {
        for layer in &mut l.layers {
            let h = layer.hidden_size();
            layer.u.value.fill(0.0);
            // The cell state also carries history, so the forget gate is closed too.
            for j in h..2 * h {
                for r in 0..layer.w.value.rows() {
                    layer.w.value.set(r, j, 0.0);
                }
                layer.b.value.set(0, j, -1e3);
            }
        }
    }
    permuted_history_invariant(&net, kind);
}
