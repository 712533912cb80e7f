//! Drives the config runner from code: builds a small experiment, runs it
//! into a temporary directory, and re-verifies one of the written traces.
//!
//! The same config as a file runs with
//! `nag-cert run config.json --out out/` and a trace re-checks with
//! `nag-cert --verify-only out/<run>.csv`.

use nag_cert::cli::{self, ExperimentConfig, RunOptions};

const CONFIG: &str = r#"{
  "problem": { "kind": "quadratic", "diag": [0.5, 5.0], "shift": [1.0, -1.0] },
  "methods": ["gd", "nesterov", "nesterov-phase"],
  "s_fraction": [0.9],
  "r": [2.0, 5.0],
  "max_iter": 3000,
  "checks": { "r_independence_tolerance": null }
}"#;

fn main() -> nag_cert::Result<()> {
    let cfg = ExperimentConfig::from_json(CONFIG)?;
    let out = std::env::temp_dir().join("nag-cert-example");
    let report = cli::run_experiment(&cfg, &RunOptions { out: Some(out.clone()), jobs: None })?;
    for v in &report.verdicts {
        println!("{} {} [{}]: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.run.as_deref().unwrap_or("-"), v.detail);
    }
    let trace = out.join(&report.runs[1].csv);
    let check = cli::verify_only(&trace)?;
    println!("re-verified {}: passed {}", check.trace, check.passed);
    Ok(())
}
