//! The gradient-correction high-resolution ODE
//!
//! ```text
//! Ẍ + (3/t)Ẋ + √s∇²f(X)Ẋ + (1 + 3√s/(2t))∇f(X) = 0
//! ```
//!
//! integrated with fixed-step RK4, and its Lyapunov function
//!
//! ```text
//! E(t) = 2t(t+√s)(f(X) − f(x*)) + (t²/2)‖Ẋ‖² + ½‖tẊ + 2(X − x*) + t√s∇f(X)‖².
//! ```
//!
//! The `3/t` term is singular at `t = 0`, so trajectories start at `t0 > 0`
//! (by default `√s`) with zero velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::SmoothProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSample {
    pub t: f64,
    pub f_err: f64,
    pub lyapunov: f64,
    pub theorem3_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousTrace {
    pub samples: Vec<ContinuousSample>,
    /// `T = 4/(μ√s)`.
    pub threshold_time: f64,
    /// `E` at the first sample with `t ≥ T`, if any.
    pub energy_at_threshold: Option<f64>,
    pub final_state: ContinuousState,
}

/// `∇²f(X)V`, analytic when available, otherwise a central difference of
/// gradients with `h = 10⁻⁶(1 + ‖X‖)/(1 + ‖V‖)`.
pub fn hessian_vec(problem: &SmoothProblem, x: &[f64], v: &[f64]) -> Vec<f64> {
    if let Some(hv) = problem.hessian_vec(x, v) {
        return hv;
    }
    let h = 1e-6 * (1.0 + linalg::norm(x)) / (1.0 + linalg::norm(v));
    let gp = problem.gradient(&linalg::axpy(x, h, v));
    let gm = problem.gradient(&linalg::axpy(x, -h, v));
    gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// `Ẍ = −(3/t)V − √s∇²f(X)V − (1 + 3√s/(2t))∇f(X)`.
pub fn ode_rhs(problem: &SmoothProblem, state: &ContinuousState, s: f64) -> Result<Vec<f64>> {
    acceleration(problem, state.t, &state.x, &state.v, s)
}

fn acceleration(problem: &SmoothProblem, t: f64, x: &[f64], v: &[f64], s: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::SingularTime { t });
    }
    let rs = s.sqrt();
    let g = problem.gradient(x);
    let hv = hessian_vec(problem, x, v);
    let cg = 1.0 + 1.5 * rs / t;
    Ok(v.iter()
        .zip(hv.iter().zip(&g))
        .map(|(vi, (hi, gi))| -(3.0 / t) * vi - rs * hi - cg * gi)
        .collect())
}

/// `E(t)` at the given state.
pub fn continuous_lyapunov(problem: &SmoothProblem, state: &ContinuousState, s: f64) -> Result<f64> {
    let t = state.t;
    if !(t > 0.0) {
        return Err(Error::SingularTime { t });
    }
    let rs = s.sqrt();
    let xs = problem.minimizer()?;
    let g = problem.gradient(&state.x);
    let potential = 2.0 * t * (t + rs) * problem.gap(&state.x)?;
    let kinetic = 0.5 * t * t * linalg::norm_sq(&state.v);
    let mixed: f64 = state
        .v
        .iter()
        .zip(state.x.iter().zip(xs))
        .zip(&g)
        .map(|((vi, (xi, si)), gi)| {
            let m = t * vi + 2.0 * (xi - si) + t * rs * gi;
            m * m
        })
        .sum();
    Ok(potential + kinetic + 0.5 * mixed)
}

/// Largest step allowed by [`integrate`]: `min(t0/10, 0.5/√L·min(1, √s))`.
pub fn max_step(t0: f64, lipschitz: f64, s: f64) -> f64 {
    (t0 / 10.0).min(0.5 / lipschitz.sqrt() * s.sqrt().min(1.0))
}

/// Growth factor of `f − f*` over its initial value that counts as blowup.
pub const BLOWUP_FACTOR: f64 = 1e10;

/// Integration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub s: f64,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_every: usize,
}

impl OdeConfig {
    /// Starts at `t0 = √s` with the largest admissible step.
    pub fn new(problem: &SmoothProblem, s: f64, x0: Vec<f64>, t_end: f64) -> Self {
        let t0 = s.sqrt();
        Self {
            s,
            x0,
            t0,
            t_end,
            dt: max_step(t0, problem.lipschitz(), s),
            sample_every: 1,
        }
    }

    pub fn dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn sample_every(mut self, n: usize) -> Self {
        self.sample_every = n;
        self
    }
}

fn rk4_step(problem: &SmoothProblem, t: f64, x: &[f64], v: &[f64], h: f64, s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let k1x = v.to_vec();
    let k1v = acceleration(problem, t, x, v, s)?;
    let x2 = linalg::axpy(x, 0.5 * h, &k1x);
    let v2 = linalg::axpy(v, 0.5 * h, &k1v);
    let k2v = acceleration(problem, t + 0.5 * h, &x2, &v2, s)?;
    let x3 = linalg::axpy(x, 0.5 * h, &v2);
    let v3 = linalg::axpy(v, 0.5 * h, &k2v);
    let k3v = acceleration(problem, t + 0.5 * h, &x3, &v3, s)?;
    let x4 = linalg::axpy(x, h, &v3);
    let v4 = linalg::axpy(v, h, &k3v);
    let k4v = acceleration(problem, t + h, &x4, &v4, s)?;
    let nx = (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]))
        .collect();
    let nv = (0..v.len())
        .map(|i| v[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]))
        .collect();
    Ok((nx, nv))
}

/// RK4 on the first-order system `(X, V)` from `V(t0) = 0`.
///
/// The span is split into the smallest number of equal steps not longer
/// than `cfg.dt`; the endpoint is always sampled.
pub fn integrate(problem: &SmoothProblem, cfg: &OdeConfig) -> Result<ContinuousTrace> {
    let OdeConfig { s, t0, t_end, dt, .. } = *cfg;
    if cfg.x0.len() != problem.dim() {
        return Err(Error::InvalidArgument(format!(
            "x0 has length {}, problem has dimension {}",
            cfg.x0.len(),
            problem.dim()
        )));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("s must be positive, got {s}")));
    }
    if !(t0 > 0.0 && t0 < t_end) {
        return Err(Error::InvalidArgument(format!("need 0 < t0 < t_end, got t0 = {t0}, t_end = {t_end}")));
    }
    let limit = max_step(t0, problem.lipschitz(), s);
    if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("dt = {dt} exceeds the stable step {limit}")));
    }
    if cfg.sample_every == 0 {
        return Err(Error::InvalidArgument("sample_every must be at least 1".into()));
    }
    let steps = ((t_end - t0) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = (t_end - t0) / steps as f64;

    let mut x = cfg.x0.clone();
    let mut v = vec![0.0; x.len()];
    let sample = |t: f64, x: &[f64], v: &[f64]| -> Result<ContinuousSample> {
        let st = ContinuousState { t, x: x.to_vec(), v: v.to_vec() };
        Ok(ContinuousSample {
            t,
            f_err: problem.gap(x)?,
            lyapunov: continuous_lyapunov(problem, &st, s)?,
            theorem3_bound: None,
        })
    };
    let first = sample(t0, &x, &v)?;
    let initial = first.f_err;
    let mut samples = vec![first];
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let (nx, nv) = rk4_step(problem, t, &x, &v, h, s)?;
        x = nx;
        v = nv;
        let t_next = if i + 1 == steps { t_end } else { t0 + (i + 1) as f64 * h };
        let last = i + 1 == steps;
        if (i + 1) % cfg.sample_every == 0 || last {
            let smp = sample(t_next, &x, &v)?;
            if !smp.f_err.is_finite() || (initial > 0.0 && smp.f_err > BLOWUP_FACTOR * initial) {
                return Err(Error::IntegratorBlowup {
                    t: t_next,
                    f_err: smp.f_err,
                    initial,
                });
            }
            samples.push(smp);
        }
    }

    let threshold_time = 4.0 / (problem.mu() * s.sqrt());
    let energy_at_threshold = attach_theorem3_bound(&mut samples, threshold_time, problem.mu(), s);
    Ok(ContinuousTrace {
        samples,
        threshold_time,
        energy_at_threshold,
        final_state: ContinuousState { t: t_end, x, v },
    })
}

fn attach_theorem3_bound(samples: &mut [ContinuousSample], t_thr: f64, mu: f64, s: f64) -> Option<f64> {
    let anchor = samples.iter().find(|p| p.t >= t_thr)?;
    let (t_a, e_a) = (anchor.t, anchor.lyapunov);
    for p in samples.iter_mut().filter(|p| p.t >= t_a) {
        p.theorem3_bound = Some(theorem3_bound(e_a, t_a, p.t, mu, s));
    }
    Some(e_a)
}

/// `E(T)/(2t(t+√s))·exp(−(μ√s/4)(t − T))`.
pub fn theorem3_bound(energy_at_threshold: f64, t_thr: f64, t: f64, mu: f64, s: f64) -> f64 {
    let rs = s.sqrt();
    energy_at_threshold / (2.0 * t * (t + rs)) * (-(mu * rs / 4.0) * (t - t_thr)).exp()
}

/// Relative per-step slack in the monotonicity check of `E(t)`.
pub const MONOTONE_TOL: f64 = 1e-6;

/// Relative slack in the exponential-decay check of `E(t)`.
pub const DECAY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub threshold_time: f64,
    pub anchor_time: f64,
    pub energy_at_threshold: f64,
    pub tolerance: f64,
    pub samples_checked: usize,
    pub bound_violations: usize,
    pub max_ratio: f64,
    /// Consecutive samples past `T` where `E` grows by more than [`MONOTONE_TOL`].
    pub monotone_violations: usize,
    /// Consecutive samples where `E(t₂) > E(t₁)e^{−(μ√s/4)(t₂−t₁)}(1 + DECAY_TOL)`.
    pub decay_violations: usize,
    pub passed: bool,
}

/// Checks `f_err(t) ≤ bound(t)·(1 + tol)` for every sample at or after
/// `T = 4/(μ√s)`, along with the decay of `E` past `T`.
pub fn theorem3_check(trace: &ContinuousTrace, mu: f64, s: f64, tol: f64) -> Result<Theorem3Report> {
    let t_thr = 4.0 / (mu * s.sqrt());
    let last = trace.samples.last().map(|p| p.t).unwrap_or(0.0);
    let Some(anchor) = trace.samples.iter().find(|p| p.t >= t_thr) else {
        return Err(Error::InsufficientHorizon {
            t_max: last,
            threshold: t_thr,
        });
    };
    let (t_a, e_a) = (anchor.t, anchor.lyapunov);
    let after: Vec<&ContinuousSample> = trace.samples.iter().filter(|p| p.t >= t_a).collect();
    let mut rep = Theorem3Report {
        threshold_time: t_thr,
        anchor_time: t_a,
        energy_at_threshold: e_a,
        tolerance: tol,
        samples_checked: after.len(),
        bound_violations: 0,
        max_ratio: 0.0,
        monotone_violations: 0,
        decay_violations: 0,
        passed: false,
    };
    let rate = mu * s.sqrt() / 4.0;
    for p in &after {
        let b = theorem3_bound(e_a, t_a, p.t, mu, s);
        if p.f_err > b * (1.0 + tol) {
            rep.bound_violations += 1;
        }
        if b > 0.0 {
            rep.max_ratio = rep.max_ratio.max(p.f_err / b);
        }
    }
    for w in after.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.lyapunov > a.lyapunov * (1.0 + MONOTONE_TOL) {
            rep.monotone_violations += 1;
        }
        if b.lyapunov > a.lyapunov * (-rate * (b.t - a.t)).exp() * (1.0 + DECAY_TOL) {
            rep.decay_violations += 1;
        }
    }
    rep.passed = rep.bound_violations == 0 && rep.monotone_violations == 0 && rep.decay_violations == 0;
    Ok(rep)
}

/// `‖X_h − X_{h/2}‖ / ‖X_{h/2} − X_{h/4}‖` at `t_end`; about 16 for a
/// fourth-order method.
pub fn richardson_ratio(problem: &SmoothProblem, cfg: &OdeConfig) -> Result<f64> {
    let end = |dt: f64| -> Result<Vec<f64>> {
        let c = OdeConfig {
            dt,
            sample_every: usize::MAX,
            ..cfg.clone()
        };
        Ok(integrate(problem, &c)?.final_state.x)
    };
    let a = end(cfg.dt)?;
    let b = end(cfg.dt / 2.0)?;
    let c = end(cfg.dt / 4.0)?;
    Ok(linalg::norm(&linalg::sub(&a, &b)) / linalg::norm(&linalg::sub(&b, &c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_logsumexp_ridge, make_quadratic};
    use approx::assert_relative_eq;

    fn half_square() -> SmoothProblem {
        make_quadratic(&[0.5], &[0.0]).unwrap()
    }

    fn state(t: f64, x: f64, v: f64) -> ContinuousState {
        ContinuousState { t, x: vec![x], v: vec![v] }
    }

    #[test]
    fn rhs_hand_example() {
        let a = ode_rhs(&half_square(), &state(1.0, 1.0, 0.0), 0.04).unwrap();
        assert_relative_eq!(a[0], -1.3, max_relative = 1e-15);
    }

    #[test]
    fn rhs_equilibrium_and_linearity() {
        let p = make_quadratic(&[1.0, 2.0], &[0.5, -1.0]).unwrap();
        let st = ContinuousState { t: 2.0, x: vec![0.5, -1.0], v: vec![0.0, 0.0] };
        assert_eq!(ode_rhs(&p, &st, 0.04).unwrap(), vec![0.0, 0.0]);
        let st1 = ContinuousState { t: 2.0, x: vec![0.5, -1.0], v: vec![0.3, 0.1] };
        let st2 = ContinuousState { t: 2.0, x: vec![0.5, -1.0], v: vec![0.6, 0.2] };
        let (a1, a2) = (ode_rhs(&p, &st1, 0.04).unwrap(), ode_rhs(&p, &st2, 0.04).unwrap());
        for (x, y) in a1.iter().zip(&a2) {
            assert_relative_eq!(2.0 * x, *y, max_relative = 1e-15);
        }
    }

    #[test]
    fn rhs_rejects_nonpositive_time() {
        assert!(matches!(ode_rhs(&half_square(), &state(0.0, 1.0, 0.0), 0.04), Err(Error::SingularTime { .. })));
    }

    #[test]
    fn lyapunov_hand_example() {
        let e = continuous_lyapunov(&half_square(), &state(1.0, 1.0, 0.0), 0.04).unwrap();
        assert_relative_eq!(e, 3.62, max_relative = 1e-14);
        let e0 = continuous_lyapunov(&half_square(), &state(3.0, 0.0, 0.0), 0.04).unwrap();
        assert_eq!(e0, 0.0);
    }

    #[test]
    fn lyapunov_scaling_in_t() {
        // X = 0, V = 1: E = t²/2 + t²/2 = t²
        let p = half_square();
        for t in [0.5, 4.0] {
            let e = continuous_lyapunov(&p, &state(t, 0.0, 1.0), 0.04).unwrap();
            assert_relative_eq!(e, t * t, max_relative = 1e-14);
        }
    }

    #[test]
    fn fd_hessian_fallback() {
        let p = make_logsumexp_ridge(vec![vec![1.0, 0.5], vec![-0.3, 1.0], vec![0.2, -0.7]], vec![0.1, 0.0, -0.2], 0.5).unwrap();
        let (x, v) = ([0.3, -0.2], [1.0, 0.4]);
        let exact = p.hessian_vec(&x, &v).unwrap();
        let h = 1e-6 * (1.0 + linalg::norm(&x)) / (1.0 + linalg::norm(&v));
        let gp = p.gradient(&linalg::axpy(&x, h, &v));
        let gm = p.gradient(&linalg::axpy(&x, -h, &v));
        for i in 0..2 {
            assert!(((gp[i] - gm[i]) / (2.0 * h) - exact[i]).abs() < 1e-4 * (1.0 + exact[i].abs()));
        }
    }

    #[test]
    fn equilibrium_is_preserved() {
        let p = make_quadratic(&[0.5, 1.0], &[1.0, 2.0]).unwrap();
        let cfg = OdeConfig::new(&p, 0.04, vec![1.0, 2.0], 10.0);
        let tr = integrate(&p, &cfg).unwrap();
        assert!(tr.samples.iter().all(|s| s.f_err == 0.0));
        assert_eq!(tr.final_state.x, vec![1.0, 2.0]);
    }

    #[test]
    fn decays_between_30_and_60() {
        let p = half_square();
        let cfg = OdeConfig::new(&p, 0.04, vec![1.0], 100.0);
        assert_relative_eq!(cfg.t0, 0.2, max_relative = 1e-15);
        let tr = integrate(&p, &cfg).unwrap();
        let at = |t: f64| tr.samples.iter().find(|s| s.t >= t).unwrap().f_err;
        assert!(at(60.0) < at(30.0));
        assert_eq!(tr.samples.last().unwrap().t, 100.0);
    }

    #[test]
    fn rejects_large_step_and_bad_span() {
        let p = half_square();
        let cfg = OdeConfig::new(&p, 0.04, vec![1.0], 10.0);
        assert!(integrate(&p, &cfg.clone().dt(0.5)).is_err());
        let bad = OdeConfig { t_end: 0.1, ..cfg };
        assert!(integrate(&p, &bad).is_err());
    }

    #[test]
    fn threshold_time_and_anchor_ratio() {
        let p = half_square();
        let cfg = OdeConfig::new(&p, 0.04, vec![1.0], 40.0);
        let tr = integrate(&p, &cfg).unwrap();
        assert_relative_eq!(tr.threshold_time, 20.0, max_relative = 1e-14);
        let rep = theorem3_check(&tr, 1.0, 0.04, 1e-3).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_ratio <= 1.0);
    }

    #[test]
    fn short_horizon_is_an_error() {
        let p = half_square();
        let tr = integrate(&p, &OdeConfig::new(&p, 0.04, vec![1.0], 10.0)).unwrap();
        assert!(matches!(theorem3_check(&tr, 1.0, 0.04, 1e-3), Err(Error::InsufficientHorizon { .. })));
    }
}
