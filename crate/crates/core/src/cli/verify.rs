//! Re-certification of a trace already on disk.
//!
//! The bound columns of a discrete trace are checked against the measured
//! errors directly. The contraction check and the rounding floors need
//! `rate_base`, `K` and the floors, which are read from a `report.json`
//! next to the trace when one is present.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_csv, CsvTrace, Report, RunReport, Verdict, REPORT_FILE};
use crate::error::{Error, Result};
use crate::lyapunov::{self, Resolution, TheoremBound, CONTRACTION_TOL};
use crate::ode::{self, ContinuousSample, ContinuousState, ContinuousTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trace: String,
    /// Whether a sibling report supplied the certificate constants.
    pub used_report: bool,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

fn sibling_run(path: &Path) -> Result<Option<(Report, RunReport)>> {
    let Some(dir) = path.parent() else {
        return Ok(None);
    };
    let rp = dir.join(REPORT_FILE);
    if !rp.exists() {
        return Ok(None);
    }
    let report: Report = serde_json::from_str(&fs::read_to_string(rp)?)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let run = report.runs.iter().find(|r| r.csv == name).cloned();
    Ok(run.map(|r| (report, r)))
}

fn verdict(name: &str, passed: bool, detail: String) -> Verdict {
    Verdict {
        name: name.into(),
        run: None,
        passed,
        detail,
    }
}

/// Re-runs the certificate checks on the CSV trace at `path`.
pub fn verify_only(path: &Path) -> Result<VerifyReport> {
    let trace = read_csv(path)?;
    let sibling = sibling_run(path)?;
    let mut verdicts = Vec::new();
    match trace {
        CsvTrace::Discrete(records) => {
            let cert = sibling.as_ref().and_then(|(_, r)| r.certificate.clone());
            let first_bounded = records.iter().find(|r| r.bound_f.is_some()).map(|r| r.k);
            let Some(k_threshold) = first_bounded else {
                return Err(Error::InvalidInput("trace carries no theorem bounds".into()));
            };
            let (tb, resolution, tol) = match &cert {
                Some(c) => (c.bound, c.resolution, c.tolerance),
                None => (
                    // only k_threshold matters once the floors are zero
                    TheoremBound {
                        k_threshold,
                        energy_at_k: 0.0,
                        s: 0.0,
                        r: 0.0,
                        mu: 0.0,
                        lipschitz: 0.0,
                    },
                    Resolution::EXACT,
                    CONTRACTION_TOL,
                ),
            };
            let d = lyapunov::check_domination(&records, &tb, tol, &resolution);
            verdicts.push(verdict(
                "theorem_bounds",
                d.passed,
                format!(
                    "{} records, {} f / {} residual violations",
                    d.records_checked, d.f_violations, d.grad_violations
                ),
            ));
            match &cert {
                Some(c) if c.contraction_window > 0 => {
                    let ct = lyapunov::lyapunov_contraction_check(&records, &tb, c.contraction_window, tol, &resolution)?;
                    verdicts.push(verdict(
                        "lyapunov_contraction",
                        ct.passed,
                        format!("{} steps, {} violations", ct.steps_checked, ct.violations),
                    ));
                }
                _ => {}
            }
        }
        CsvTrace::Continuous(samples) => match &sibling {
            Some((report, run)) => {
                let tol = run.theorem3.as_ref().map(|t| t.tolerance).unwrap_or(ode::DECAY_TOL);
                let tr = ContinuousTrace {
                    samples,
                    threshold_time: 0.0,
                    energy_at_threshold: None,
                    final_state: ContinuousState {
                        t: 0.0,
                        x: Vec::new(),
                        v: Vec::new(),
                    },
                };
                let t3 = ode::theorem3_check(&tr, report.problem.mu, run.s, tol)?;
                verdicts.push(verdict(
                    "theorem3_bound",
                    t3.passed,
                    format!("{} samples, max ratio {:.4}", t3.samples_checked, t3.max_ratio),
                ));
            }
            None => verdicts.push(check_bound_column(&samples)),
        },
    }
    let passed = verdicts.iter().all(|v| v.passed);
    Ok(VerifyReport {
        trace: path.display().to_string(),
        used_report: sibling.is_some(),
        verdicts,
        passed,
    })
}

fn check_bound_column(samples: &[ContinuousSample]) -> Verdict {
    let bounded: Vec<&ContinuousSample> = samples.iter().filter(|p| p.theorem3_bound.is_some()).collect();
    let bad = bounded
        .iter()
        .filter(|p| p.f_err > p.theorem3_bound.unwrap_or(f64::INFINITY) * (1.0 + ode::DECAY_TOL))
        .count();
    verdict(
        "theorem3_bound",
        !bounded.is_empty() && bad == 0,
        format!("{} samples, {bad} violations", bounded.len()),
    )
}
