//! Runs an experiment config through the library and prints its verdicts:
//! `cargo run --example run_config -- configs/tailfree.json`.

use bayes_limits::experiments::{self, ExperimentConfig};
use bayes_limits::rng::Runtime;

fn main() -> bayes_limits::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/tailfree.json").into());
    let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&path)?)?;
    let rt = Runtime::new(cfg.seed.unwrap_or(1), bayes_limits::cli::logical_cores());
    let report = experiments::run(&cfg, rt)?;
    for v in &report.verdicts {
        println!("{}: {} {}", v.name, if v.passed { "pass" } else { "fail" }, v.detail);
    }
    println!(
        "{} rows, all asserted verdicts pass: {}",
        report.rows.len(),
        report.passed()
    );
    Ok(())
}
