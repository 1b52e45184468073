//! The gen, train and eval commands end to end on a config written inline,
//! with a short training run so it finishes quickly.
//!
//! `cargo run --release --example pipeline`

use hystkin::cli::run;

const CONFIG: &str = "\
seed = 7

[plant]
kind = catheter
noise_std_deg = 0.05

[train]
epochs = 20

[eval]
kinds = fnn, fnn-hib
directions = fwd
";

fn main() -> std::io::Result<()> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("experiment.cfg");
    std::fs::write(&config, CONFIG)?;
    let out = dir.path().join("out");
    let common = ["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];

    let steps: [&[&str]; 4] = [
        &["gen"],
        &["train", "--kind", "fnn", "--direction", "fwd"],
        &["train", "--kind", "fnn-hib", "--direction", "fwd"],
        &["eval"],
    ];
    for step in steps {
        let argv = std::iter::once("hystkin").chain(step.iter().copied()).chain(common);
        let code = run(argv);
        if code != 0 {
            eprintln!("step {step:?} failed with exit code {code}");
            std::process::exit(code);
        }
    }
    println!("{}", std::fs::read_to_string(out.join("eval/report.txt"))?);
    Ok(())
}
