//! Gradient descent, Nesterov-1983 (two-sequence and phase-space forms) and FISTA.
//!
//! All methods share one state layout. Indexing starts at `k = 0` with
//! `y₀ = x₀`; the momentum coefficient used when forming `y_k` is
//! `(k − 1)/(k + r)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{Problem, SmoothProblem, CompositeProblem, StepSize};

/// Iteration state shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub k: usize,
    pub x: Vec<f64>,
    /// `x_{k−1}`; equal to `x` at the starting index.
    pub x_prev: Vec<f64>,
    pub y: Vec<f64>,
    /// `v_k = (x_k − x_{k−1})/√s`, carried only by the phase-space form.
    pub v: Option<Vec<f64>>,
    pub r: f64,
    pub s: StepSize,
}

impl OptimizerState {
    /// State at `k = 0` with `y₀ = x₀`.
    pub fn new(x0: Vec<f64>, r: f64, s: StepSize) -> Self {
        Self::starting_at(0, x0, r, s)
    }

    /// State at an arbitrary starting index (used for integer negative `r`).
    pub fn starting_at(k: usize, x0: Vec<f64>, r: f64, s: StepSize) -> Self {
        Self {
            k,
            x_prev: x0.clone(),
            y: x0.clone(),
            x: x0,
            v: None,
            r,
            s,
        }
    }

    /// `v_k`, from the carried velocity or from the two stored iterates.
    pub fn velocity(&self) -> Vec<f64> {
        match &self.v {
            Some(v) => v.clone(),
            None => linalg::scale(1.0 / self.s.sqrt(), &linalg::sub(&self.x, &self.x_prev)),
        }
    }

    /// `(k − 1)/(k + r)` for the current `k`.
    pub fn momentum(&self) -> Result<f64> {
        momentum_coefficient(self.k, self.r)
    }
}

/// `(k − 1)/(k + r)`; errors when `k + r = 0`.
pub fn momentum_coefficient(k: usize, r: f64) -> Result<f64> {
    let denom = k as f64 + r;
    if denom == 0.0 {
        return Err(Error::MomentumSingularity { k, r });
    }
    Ok((k as f64 - 1.0) / denom)
}

/// Which iteration to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gd,
    Nesterov,
    NesterovPhase,
    Fista,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Nesterov => "nesterov",
            Method::NesterovPhase => "nesterov-phase",
            Method::Fista => "fista",
        }
    }

    pub fn uses_momentum(&self) -> bool {
        !matches!(self, Method::Gd)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Method::Gd),
            "nesterov" => Ok(Method::Nesterov),
            "nesterov-phase" => Ok(Method::NesterovPhase),
            "fista" => Ok(Method::Fista),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// `x − s∇f(x)`
pub fn gd_step(problem: &SmoothProblem, x: &[f64], s: StepSize) -> Vec<f64> {
    linalg::axpy(x, -s.value(), &problem.gradient(x))
}

fn momentum_step(problem: &Problem, state: &OptimizerState) -> Result<OptimizerState> {
    let k = state.k;
    let beta = momentum_coefficient(k + 1, state.r)?;
    let x_next = problem.forward_step(&state.y, state.s.value());
    let y_next = linalg::axpy(&x_next, beta, &linalg::sub(&x_next, &state.x));
    Ok(OptimizerState {
        k: k + 1,
        x_prev: state.x.clone(),
        x: x_next,
        y: y_next,
        v: None,
        r: state.r,
        s: state.s,
    })
}

/// One Nesterov-1983 step in the two-sequence form:
/// `x_{k+1} = y_k − s∇f(y_k)`, `y_{k+1} = x_{k+1} + k/(k+1+r)·(x_{k+1} − x_k)`.
pub fn nesterov_step(problem: &SmoothProblem, state: &OptimizerState) -> Result<OptimizerState> {
    momentum_step(&Problem::Smooth(problem.clone()), state)
}

/// One FISTA step: the gradient step is replaced by `P_s(y_k)`.
pub fn fista_step(problem: &CompositeProblem, state: &OptimizerState) -> Result<OptimizerState> {
    momentum_step(&Problem::Composite(problem.clone()), state)
}

/// One step of the implicit-velocity (phase-space) form
///
/// ```text
/// y_k       = x_k + (k−1)/(k+r)·√s·v_k
/// v_{k+1}   = v_k − (r+1)/(k+r)·v_k − √s·∇f(y_k)
/// x_{k+1}   = x_k + √s·v_{k+1}
/// ```
///
/// Needs `k ≥ 1`; run one [`nesterov_step`] from `k = 0` first.
pub fn nesterov_phase_step(problem: &SmoothProblem, state: &OptimizerState) -> Result<OptimizerState> {
    phase_step(&Problem::Smooth(problem.clone()), state)
}

fn phase_step(problem: &Problem, state: &OptimizerState) -> Result<OptimizerState> {
    let k = state.k;
    if k == 0 {
        return Err(Error::InvalidArgument(
            "phase-space step needs k >= 1 (v_0 is undefined)".into(),
        ));
    }
    let rs = state.s.sqrt();
    let denom = k as f64 + state.r;
    if denom == 0.0 {
        return Err(Error::MomentumSingularity { k, r: state.r });
    }
    let v = state.velocity();
    let y = linalg::axpy(&state.x, (k as f64 - 1.0) / denom * rs, &v);
    let grad = problem.residual(&y, state.s.value());
    let damp = 1.0 - (state.r + 1.0) / denom;
    let v_next: Vec<f64> = v.iter().zip(&grad).map(|(vi, gi)| damp * vi - rs * gi).collect();
    let x_next = linalg::axpy(&state.x, rs, &v_next);
    let beta = momentum_coefficient(k + 1, state.r)?;
    let y_next = linalg::axpy(&x_next, beta * rs, &v_next);
    Ok(OptimizerState {
        k: k + 1,
        x_prev: state.x.clone(),
        x: x_next,
        y: y_next,
        v: Some(v_next),
        r: state.r,
        s: state.s,
    })
}

/// Scaled residual of `(k+r)v_{k+1} − (k−1)v_k + (k+r)√s∇f(y_k) = 0` across one phase step.
pub fn reformulated_identity_residual(
    problem: &SmoothProblem,
    before: &OptimizerState,
    after: &OptimizerState,
) -> Result<f64> {
    let k = before.k as f64;
    let r = before.r;
    let rs = before.s.sqrt();
    let v = before.velocity();
    let v_next = after.velocity();
    let beta = momentum_coefficient(before.k, r)?;
    let y = linalg::axpy(&before.x, beta * rs, &v);
    let g = problem.gradient(&y);
    let mut worst: f64 = 0.0;
    for i in 0..v.len() {
        let a = (k + r) * v_next[i];
        let b = (k - 1.0) * v[i];
        let c = (k + r) * rs * g[i];
        let scale = 1.0 + a.abs() + b.abs() + c.abs();
        worst = worst.max((a - b + c).abs() / scale);
    }
    Ok(worst)
}

/// Per-iteration measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `f(x_k) − f(x*)` or `Φ(x_k) − Φ(x*)`.
    pub f_err: f64,
    /// `‖∇f(y_k)‖²` on smooth runs.
    pub grad_sq: Option<f64>,
    /// `‖G_s(y_k)‖²` on composite runs.
    pub prox_grad_sq: Option<f64>,
    pub lyapunov: Option<f64>,
    pub bound_f: Option<f64>,
    pub bound_grad: Option<f64>,
}

impl TraceRecord {
    /// Whichever squared residual the run recorded.
    pub fn residual_sq(&self) -> Option<f64> {
        self.grad_sq.or(self.prox_grad_sq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub method: Method,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// `(k, f_err)` pairs.
    pub fn f_err_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.k as f64, r.f_err)).collect()
    }
}

/// Everything a run needs besides the problem.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    pub s: StepSize,
    pub r: f64,
    pub x0: Vec<f64>,
    pub max_iter: usize,
    pub record_every: usize,
    /// First iteration index; non-zero only for the shifted start used with integer negative `r`.
    pub start_index: usize,
}

impl RunConfig {
    pub fn new(method: Method, s: StepSize, r: f64, x0: Vec<f64>, max_iter: usize) -> Self {
        Self {
            method,
            s,
            r,
            x0,
            max_iter,
            record_every: default_record_every(max_iter),
            start_index: 0,
        }
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    /// Start from `k = −r + 1` so that `k + r ≥ 1` throughout.
    pub fn with_shifted_start(mut self) -> Self {
        self.start_index = shifted_start_index(self.r);
        self
    }
}

/// 1 up to 10⁵ iterations, 10 beyond.
pub fn default_record_every(max_iter: usize) -> usize {
    if max_iter <= 100_000 {
        1
    } else {
        10
    }
}

/// Starting index that keeps `k + r ≥ 1` for integer negative `r`; 0 otherwise.
pub fn shifted_start_index(r: f64) -> usize {
    if r < 0.0 && r.fract() == 0.0 {
        (1.0 - r) as usize
    } else {
        0
    }
}

/// Rejects momentum parameters that would hit `k + r = 0` at an executed index.
pub fn validate_momentum(r: f64, start_index: usize, max_iter: usize) -> Result<()> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!("r must be finite, got {r}")));
    }
    if r < 0.0 && r.fract() == 0.0 {
        let k = (-r) as usize;
        if k > start_index && k <= start_index + max_iter {
            return Err(Error::MomentumSingularity { k, r });
        }
    }
    Ok(())
}

/// Runs a method and records a trace.
pub fn run(problem: &Problem, cfg: &RunConfig) -> Result<Trace> {
    run_observed(problem, cfg, |_, _| Ok(()))
}

/// Like [`run`], calling `observer` on every recorded state so callers can
/// fill extra columns (Lyapunov values, for instance).
pub fn run_observed<F>(problem: &Problem, cfg: &RunConfig, mut observer: F) -> Result<Trace>
where
    F: FnMut(&OptimizerState, &mut TraceRecord) -> Result<()>,
{
    if cfg.max_iter == 0 || cfg.record_every == 0 {
        return Err(Error::InvalidArgument(
            "max_iter and record_every must be at least 1".into(),
        ));
    }
    if cfg.x0.len() != problem.dim() {
        return Err(Error::InvalidArgument(format!(
            "x0 has dimension {} but the problem has {}",
            cfg.x0.len(),
            problem.dim()
        )));
    }
    if cfg.s.value() * problem.lipschitz() >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "step size {} is not below 1/L = {}",
            cfg.s.value(),
            1.0 / problem.lipschitz()
        )));
    }
    match cfg.method {
        Method::Gd | Method::Nesterov | Method::NesterovPhase => {
            if !problem.penalty().is_zero() {
                return Err(Error::InvalidArgument(format!(
                    "{} needs a smooth problem; use fista for composite objectives",
                    cfg.method.name()
                )));
            }
        }
        Method::Fista => {}
    }
    if cfg.method.uses_momentum() {
        validate_momentum(cfg.r, cfg.start_index, cfg.max_iter)?;
    }

    // the smooth methods see only f; fista sees the full problem
    let smooth_view;
    let view: &Problem = match (cfg.method, problem) {
        (Method::Fista, _) | (_, Problem::Smooth(_)) => problem,
        (_, Problem::Composite(c)) => {
            smooth_view = Problem::Smooth(c.smooth().clone());
            &smooth_view
        }
    };
    view.minimizer()?;

    let s = cfg.s.value();
    let k0 = cfg.start_index;
    let last = k0 + cfg.max_iter;
    let mut state = OptimizerState::starting_at(k0, cfg.x0.clone(), cfg.r, cfg.s);
    let capacity = cfg.max_iter / cfg.record_every + 2;
    let mut records = Vec::with_capacity(capacity);

    loop {
        let k = state.k;
        if (k - k0).is_multiple_of(cfg.record_every) || k == last {
            let residual = linalg::norm_sq(&view.residual(&state.y, s));
            let mut rec = TraceRecord {
                k,
                f_err: view.gap(&state.x)?,
                grad_sq: None,
                prox_grad_sq: None,
                lyapunov: None,
                bound_f: None,
                bound_grad: None,
            };
            if view.is_composite() {
                rec.prox_grad_sq = Some(residual);
            } else {
                rec.grad_sq = Some(residual);
            }
            observer(&state, &mut rec)?;
            records.push(rec);
        }
        if k == last {
            break;
        }
        state = match cfg.method {
            Method::Gd => {
                let x = view.forward_step(&state.x, s);
                OptimizerState {
                    k: k + 1,
                    x_prev: std::mem::take(&mut state.x),
                    y: x.clone(),
                    x,
                    v: None,
                    r: state.r,
                    s: state.s,
                }
            }
            Method::Nesterov | Method::Fista => momentum_step(view, &state)?,
            Method::NesterovPhase => {
                if k == k0 {
                    let mut next = momentum_step(view, &state)?;
                    next.v = Some(next.velocity());
                    next
                } else {
                    phase_step(view, &state)?
                }
            }
        };
    }
    Ok(Trace {
        method: cfg.method,
        records,
    })
}

/// Iterates only (no trace), handy for comparing forms.
pub fn iterates(problem: &Problem, cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(cfg.max_iter + 1);
    run_observed(problem, &cfg.clone().record_every(1), |st, _| {
        out.push(st.x.clone());
        Ok(())
    })?;
    Ok(out)
}
