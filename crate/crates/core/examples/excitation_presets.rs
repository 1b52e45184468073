//! Prints the three decaying presets and checks the per-cycle shrink factor.
//!
//! `cargo run --example excitation_presets`

use hystkin::excitation::{baseline_preset, refined_maxima, sample, BaselineKind};

fn main() -> hystkin::Result<()> {
    let f_h = 0.2;
    for kind in BaselineKind::ALL {
        let spec = baseline_preset(kind, f_h, 3.0, 12.0)?;
        let s = sample(&spec, 25.0)?;
        let (lo, hi) = s
            .q_cmd_mm
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &q| (a.min(q), b.max(q)));
        // Maxima of the decaying part, flipped for the preset that hangs below its offset.
        let sign = if spec.c < 0.0 { -1.0 } else { 1.0 };
        let term: Vec<f64> = s.q_cmd_mm.iter().map(|q| sign * (q - spec.q_offset)).collect();
        let peaks = refined_maxima(&term, s.dt_s, s.t0_s);
        let ratios: Vec<String> = peaks.windows(2).take(4).map(|w| format!("{:.6}", w[1].1 / w[0].1)).collect();
        println!(
            "{kind:>4}: c = {:>2}, offset {:.1} mm, tau {:.4} 1/s, {} samples over {:.0} s, q in [{lo:.3}, {hi:.3}] mm",
            spec.c,
            spec.q_offset,
            spec.tau,
            s.len(),
            spec.t_max
        );
        println!("      first peak ratios {} (6/7 = {:.6})", ratios.join(" "), 6.0 / 7.0);
    }
    Ok(())
}
