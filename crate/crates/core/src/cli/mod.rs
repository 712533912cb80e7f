//! Config-driven experiment runner.
//!
//! One [`ExperimentConfig`] expands into a grid of runs (method × s × r).
//! Each run writes a CSV trace; the experiment writes `report.json` with
//! the certificates, fits and a flat list of verdicts.

mod config;
mod trace_csv;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, RateFit};
use crate::error::{Error, Result};
use crate::lyapunov::{self, ContractionReport, DominationReport, Resolution, TheoremBound, Threshold};
use crate::ode::{self, OdeConfig, Theorem3Report};
use crate::optimizers::{self, RunConfig, TraceRecord};
use crate::problems::{Problem, StepSize};
use crate::spectral;

pub use config::{Checks, ExperimentConfig, MethodSpec, ProblemSpec};
pub use trace_csv::{
    emit_continuous_csv, emit_csv, read_csv, read_trace, write_continuous, write_discrete, CsvTrace,
    CONTINUOUS_HEADER, DISCRETE_HEADER,
};
pub use verify::{verify_only, VerifyReport};

/// Environment variable that overrides the config's output directory.
pub const OUT_DIR_ENV: &str = "NAG_CERT_OUT";

pub const REPORT_FILE: &str = "report.json";

/// Acceptable Richardson ratio for a fourth-order integrator.
pub const RICHARDSON_RANGE: (f64, f64) = (12.0, 20.0);

/// The order check integrates over `ORDER_CHECK_SPAN/√μ` past `t0` at most.
pub const ORDER_CHECK_SPAN: f64 = 10.0;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Takes precedence over the config's `out`.
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// 1 for smooth problems, 2 for composite ones.
    pub theorem: u8,
    pub threshold: Threshold,
    pub bound: TheoremBound,
    pub rate_base: f64,
    pub resolution: Resolution,
    pub tolerance: f64,
    pub contraction_window: usize,
    pub domination: DominationReport,
    pub contraction: Option<ContractionReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub id: String,
    pub method: MethodSpec,
    pub s: f64,
    pub r: Option<f64>,
    pub csv: String,
    pub records: usize,
    pub certificate: Option<CertificateReport>,
    pub certificate_error: Option<String>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    /// Asymptotic spectral prediction of the fitted slope (quadratics only).
    pub predicted_slope: Option<f64>,
    /// The same prediction including the `k^{−(r+1)}` envelope over the
    /// fitted window (momentum methods on quadratics only).
    pub window_slope: Option<f64>,
    pub theorem3: Option<Theorem3Report>,
    pub richardson_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RIndependence {
    pub method: MethodSpec,
    pub s: f64,
    pub r: Vec<f64>,
    /// Max pairwise relative slope deviation; `None` if the slopes could not be compared.
    pub deviation: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub run: Option<String>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub kind: String,
    pub dim: usize,
    pub mu: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub problem: ProblemSummary,
    pub runs: Vec<RunReport>,
    pub r_independence: Vec<RIndependence>,
    pub spectral: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
struct RunPlan {
    id: String,
    method: MethodSpec,
    s: f64,
    r: Option<f64>,
}

fn plan(cfg: &ExperimentConfig, steps: &[f64]) -> Vec<RunPlan> {
    let mut out = Vec::new();
    for &m in &cfg.methods {
        for (i, &s) in steps.iter().enumerate() {
            if m.uses_momentum() {
                for (j, &r) in cfg.r.iter().enumerate() {
                    out.push(RunPlan {
                        id: format!("{}_s{i}_r{j}", m.name()),
                        method: m,
                        s,
                        r: Some(r),
                    });
                }
            } else {
                out.push(RunPlan {
                    id: format!("{}_s{i}", m.name()),
                    method: m,
                    s,
                    r: None,
                });
            }
        }
    }
    out
}

/// Resolved output directory: `opts.out`, then the config, then `out`.
pub fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs every configured experiment, writes traces and `report.json`
/// under the output directory, and returns the report.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let problem = cfg.build_problem()?;
    cfg.validate(&problem)?;
    // resolve x* once, before the runs share the problem
    problem.minimizer()?;
    let dir = output_dir(cfg, opts);
    fs::create_dir_all(&dir)?;
    let steps = cfg.step_sizes(problem.lipschitz());
    let plans = plan(cfg, &steps);

    let exec = || -> Vec<Result<RunReport>> {
        plans
            .par_iter()
            .map(|p| {
                execute(cfg, &problem, p, &dir).map_err(|e| Error::Run {
                    id: p.id.clone(),
                    source: Box::new(e),
                })
            })
            .collect()
    };
    let results = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(exec),
        None => exec(),
    };
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let spectral = write_spectral(cfg, &problem, &steps, &dir)?;
    let r_independence = r_independence(cfg, &runs);
    let verdicts = verdicts(cfg, &runs, &r_independence);
    let passed = verdicts.iter().all(|v| v.passed);
    let report = Report {
        problem: ProblemSummary {
            kind: match cfg.problem {
                ProblemSpec::Quadratic { .. } => "quadratic".into(),
                ProblemSpec::LassoDeblur { .. } => "lasso-deblur".into(),
            },
            dim: problem.dim(),
            mu: problem.mu(),
            lipschitz: problem.lipschitz(),
        },
        runs,
        r_independence,
        spectral,
        verdicts,
        passed,
    };
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

fn predicted_slope(problem: &Problem, method: MethodSpec, s: f64) -> Option<f64> {
    if problem.is_composite() || problem.smooth().as_separable_quadratic().is_none() {
        return None;
    }
    let rate = spectral::asymptotic_rate(problem.mu(), s).ok()?;
    match method {
        MethodSpec::Gd => Some(2.0 * rate.f_error_rate.ln()),
        MethodSpec::Nesterov | MethodSpec::NesterovPhase | MethodSpec::Fista => Some(rate.f_error_rate.ln()),
        MethodSpec::Ode => None,
    }
}

fn fit(cfg: &ExperimentConfig, records: &[TraceRecord]) -> (Option<RateFit>, Option<String>) {
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.k as f64, r.f_err)).collect();
    match analysis::fit_linear_rate(&pts, cfg.burn_in as f64, cfg.fit_floor.unwrap_or_default()) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn execute(cfg: &ExperimentConfig, problem: &Problem, p: &RunPlan, dir: &Path) -> Result<RunReport> {
    let csv = format!("{}.csv", p.id);
    let path = dir.join(&csv);
    let mut rep = RunReport {
        id: p.id.clone(),
        method: p.method,
        s: p.s,
        r: p.r,
        csv,
        records: 0,
        certificate: None,
        certificate_error: None,
        fit: None,
        fit_error: None,
        predicted_slope: predicted_slope(problem, p.method, p.s),
        window_slope: None,
        theorem3: None,
        richardson_ratio: None,
    };

    let Some(method) = p.method.discrete() else {
        let smooth = problem.smooth();
        let mut oc = OdeConfig::new(smooth, p.s, cfg.x0(problem.dim())?, cfg.t_end.unwrap_or(0.0));
        if let Some(dt) = cfg.ode_dt {
            oc = oc.dt(dt);
        }
        if let Some(n) = cfg.record_every {
            oc = oc.sample_every(n);
        }
        let tr = ode::integrate(smooth, &oc)?;
        emit_continuous_csv(&tr.samples, &path)?;
        rep.records = tr.samples.len();
        rep.theorem3 = Some(ode::theorem3_check(&tr, smooth.mu(), p.s, cfg.checks.theorem3_tolerance)?);
        if cfg.checks.order_check {
            // a few slow time constants: past that the iterates can sit on
            // x* to the last bit and the step-halving differences vanish
            let span = (oc.t0 + ORDER_CHECK_SPAN / smooth.mu().sqrt()).min(oc.t_end);
            let order = OdeConfig { t_end: span, ..oc.clone() };
            rep.richardson_ratio = Some(ode::richardson_ratio(smooth, &order)?);
        }
        return Ok(rep);
    };

    let s = StepSize::new(p.s, problem.lipschitz())?;
    let mut rc = RunConfig::new(method, s, p.r.unwrap_or(0.0), cfg.x0(problem.dim())?, cfg.max_iter);
    if let Some(n) = cfg.record_every {
        rc = rc.record_every(n);
    }
    if cfg.shifted_start {
        rc = rc.with_shifted_start();
    }

    let records = if cfg.checks.certify && method.uses_momentum() {
        let threshold = lyapunov::find_k(problem.lipschitz(), problem.mu(), p.s, rc.r)?;
        if threshold.k > cfg.max_iter {
            rep.certificate_error = Some(format!(
                "max_iter = {} stops before the threshold K = {}",
                cfg.max_iter, threshold.k
            ));
            optimizers::run(problem, &rc)?.records
        } else {
            let run = lyapunov::certify_run(problem, &rc)?;
            let tol = cfg.checks.tolerance;
            let window = cfg.checks.contraction_window;
            let contraction = if window > 0 { Some(run.contraction(window, tol)?) } else { None };
            rep.certificate = Some(CertificateReport {
                theorem: if problem.is_composite() { 2 } else { 1 },
                threshold: run.threshold,
                bound: run.bound,
                rate_base: run.bound.rate_base(),
                resolution: run.resolution,
                tolerance: tol,
                contraction_window: window,
                domination: run.domination(tol),
                contraction,
            });
            run.trace.records
        }
    } else {
        optimizers::run(problem, &rc)?.records
    };
    emit_csv(&records, &path)?;
    rep.records = records.len();
    let (f, e) = fit(cfg, &records);
    if let (Some(fit), Some(_), Some(r)) = (&f, rep.predicted_slope, p.r) {
        let ks: Vec<f64> = records
            .iter()
            .map(|rec| rec.k as f64)
            .filter(|&k| k >= fit.burn_in && k > 0.0)
            .take(fit.n_points)
            .collect();
        rep.window_slope = spectral::finite_window_slope(problem.mu() * p.s, r, &ks).ok();
    }
    rep.fit = f;
    rep.fit_error = e;
    Ok(rep)
}

fn write_spectral(cfg: &ExperimentConfig, problem: &Problem, steps: &[f64], dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    if problem.is_composite() || !cfg.methods.iter().any(|m| m.uses_momentum()) {
        return Ok(files);
    }
    let ks = spectral::log_spaced(1, cfg.max_iter.max(1), 200);
    for (i, &s) in steps.iter().enumerate() {
        for (j, &r) in cfg.r.iter().enumerate() {
            let ks: Vec<usize> = ks.iter().copied().filter(|&k| k as f64 + r != 0.0).collect();
            let Ok(rows) = spectral::sweep(problem.mu(), s, r, &ks) else {
                continue;
            };
            let name = format!("spectral_s{i}_r{j}.csv");
            spectral::sweep_csv(fs::File::create(dir.join(&name))?, &rows)?;
            files.push(name);
        }
    }
    Ok(files)
}

fn r_independence(cfg: &ExperimentConfig, runs: &[RunReport]) -> Vec<RIndependence> {
    let Some(tol) = cfg.checks.r_independence_tolerance else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut seen: Vec<(MethodSpec, u64)> = Vec::new();
    for run in runs.iter().filter(|r| r.method.uses_momentum()) {
        let key = (run.method, run.s.to_bits());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let group: Vec<&RunReport> = runs
            .iter()
            .filter(|o| o.method == run.method && o.s.to_bits() == run.s.to_bits())
            .collect();
        let fits: Vec<RateFit> = group.iter().filter_map(|o| o.fit).collect();
        if group.len() < 2 || fits.len() != group.len() {
            continue;
        }
        let deviation = analysis::compare_rates(&fits).ok();
        out.push(RIndependence {
            method: run.method,
            s: run.s,
            r: group.iter().filter_map(|o| o.r).collect(),
            deviation,
            passed: deviation.is_some_and(|d| d <= tol),
        });
    }
    out
}

fn verdicts(cfg: &ExperimentConfig, runs: &[RunReport], ri: &[RIndependence]) -> Vec<Verdict> {
    let mut v = Vec::new();
    let mut push = |name: &str, run: Option<&str>, passed: bool, detail: String| {
        v.push(Verdict {
            name: name.into(),
            run: run.map(str::to_string),
            passed,
            detail,
        })
    };
    for run in runs {
        let id = Some(run.id.as_str());
        if let Some(c) = &run.certificate {
            let d = &c.domination;
            push(
                &format!("theorem{}_bounds", c.theorem),
                id,
                d.passed,
                format!(
                    "K = {}, {} records ({} resolved), {} f / {} residual violations, anchor resolved: {}",
                    c.bound.k_threshold, d.records_checked, d.resolved_records, d.f_violations, d.grad_violations, d.anchor_resolved
                ),
            );
            if let Some(ct) = &c.contraction {
                push(
                    "lyapunov_contraction",
                    id,
                    ct.passed,
                    format!(
                        "k in [{}, {}]: {} steps ({} resolved), {} violations",
                        ct.first_k, ct.last_k, ct.steps_checked, ct.resolved_steps, ct.violations
                    ),
                );
            }
        }
        if let Some(e) = &run.certificate_error {
            push("certificate", id, false, e.clone());
        }
        if let (Some(tol), Some(pred)) = (cfg.checks.rate_tolerance, run.predicted_slope) {
            match run.fit {
                Some(f) => {
                    let rel = ((f.slope - pred) / pred).abs();
                    push(
                        "rate_matches_spectrum",
                        id,
                        rel <= tol,
                        format!(
                            "slope {:.6e} vs predicted {:.6e} (relative {:.3e}); finite-window prediction {}",
                            f.slope,
                            pred,
                            rel,
                            run.window_slope.map(|w| format!("{w:.6e}")).unwrap_or_else(|| "n/a".into())
                        ),
                    );
                }
                None => push(
                    "rate_matches_spectrum",
                    id,
                    false,
                    run.fit_error.clone().unwrap_or_default(),
                ),
            }
        }
        if let Some(t) = &run.theorem3 {
            push(
                "theorem3_bound",
                id,
                t.passed,
                format!(
                    "T = {}, {} samples, max ratio {:.4}, {} bound / {} monotone / {} decay violations",
                    t.threshold_time, t.samples_checked, t.max_ratio, t.bound_violations, t.monotone_violations, t.decay_violations
                ),
            );
        }
        if let Some(q) = run.richardson_ratio {
            let (lo, hi) = RICHARDSON_RANGE;
            push("integrator_order", id, (lo..=hi).contains(&q), format!("Richardson ratio {q:.3}"));
        }
    }
    for g in ri {
        push(
            "r_independence",
            None,
            g.passed,
            format!(
                "{} at s = {}: r = {:?}, deviation {}",
                g.method.name(),
                g.s,
                g.r,
                g.deviation.map_or("undefined".into(), |d| format!("{d:.4e}"))
            ),
        );
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_expands_grid() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"kind": "quadratic", "diag": [1.0]}, "methods": ["gd", "nesterov"], "s": [0.1, 0.2], "r": [2, 5]}"#,
        )
        .unwrap();
        let ids: Vec<String> = plan(&cfg, &[0.1, 0.2]).into_iter().map(|p| p.id).collect();
        assert_eq!(
            ids,
            ["gd_s0", "gd_s1", "nesterov_s0_r0", "nesterov_s0_r1", "nesterov_s1_r0", "nesterov_s1_r1"]
        );
    }

    #[test]
    fn out_dir_precedence() {
        let mut cfg = ExperimentConfig::from_json(r#"{"problem": {"kind": "quadratic", "diag": [1.0]}, "methods": ["gd"], "s": [0.1]}"#).unwrap();
        assert_eq!(output_dir(&cfg, &RunOptions::default()), PathBuf::from("out"));
        cfg.out = Some("a".into());
        assert_eq!(output_dir(&cfg, &RunOptions::default()), PathBuf::from("a"));
        let o = RunOptions { out: Some("b".into()), jobs: None };
        assert_eq!(output_dir(&cfg, &o), PathBuf::from("b"));
    }
}
