//! Discrete Lyapunov energy for Nesterov-1983/FISTA, the threshold `K`
//! past which it contracts, the resulting linear-rate bounds, and
//! residual oracles for the inequalities the certificate rests on.
//!
//! With `v_k = (x_k − x_{k−1})/√s` the energy is
//!
//! ```text
//! E(k) = s(k+r)(2k+r)/(1−μs) · (f(x_k) − f(x*))        potential
//!      + s(k−1)²/2 · ‖v_k‖²                             kinetic
//!      + ½‖√s(k−1)v_k + r(x_k − x*)‖²                   mixed
//! ```
//!
//! and for every `k ≥ K` it satisfies `E(k+1)·(1 + (1−Ls)μs/4) ≤ E(k)`.
//! For composite problems `Φ` replaces `f` in the potential term.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizers::{self, OptimizerState, RunConfig, Trace, TraceRecord};
use crate::problems::{CompositeProblem, Problem, SmoothProblem, StepSize};

/// The three parts of `E(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub potential: f64,
    pub kinetic: f64,
    pub mixed: f64,
    pub total: f64,
}

/// `E(k)` at the given state, using the certified `mu`.
pub fn discrete_lyapunov(problem: &Problem, state: &OptimizerState, mu: f64) -> Result<EnergyBreakdown> {
    if state.k == 0 {
        return Err(Error::InvalidArgument(
            "E(k) needs k >= 1 so that v_k is defined".into(),
        ));
    }
    let s = state.s.value();
    let mu_s = mu * s;
    if !(mu_s < 1.0) {
        return Err(Error::InvalidParameter(format!("mu*s = {mu_s} must be below 1")));
    }
    let k = state.k as f64;
    let r = state.r;
    let xs = problem.minimizer()?;
    let gamma = (k + r) * (2.0 * k + r) / (1.0 - mu_s);
    let potential = s * gamma * problem.gap(&state.x)?;

    let v = state.velocity();
    let km1 = k - 1.0;
    let kinetic = 0.5 * s * km1 * km1 * linalg::norm_sq(&v);

    let rs = state.s.sqrt();
    let mixed = 0.5
        * v.iter()
            .zip(state.x.iter().zip(xs))
            .map(|(vi, (xi, si))| {
                let m = rs * km1 * vi + r * (xi - si);
                m * m
            })
            .sum::<f64>();
    Ok(EnergyBreakdown {
        potential,
        kinetic,
        mixed,
        total: potential + kinetic + mixed,
    })
}

/// Output of [`find_k`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub k: usize,
    /// Leading coefficient `μs(1−Ls)/2` of the threshold quadratic; positive
    /// means the inequality, once reached, holds for every later `k`.
    pub leading_coefficient: f64,
}

/// Cap on the threshold search.
pub const THRESHOLD_SEARCH_CAP: u64 = 1_000_000_000;

/// Number of integers after `K` re-checked before `K` is returned.
pub const THRESHOLD_PERSISTENCE: u64 = 100;

struct ThresholdQuadratic {
    a: BigRational,
    b: BigRational,
    c: BigRational,
}

impl ThresholdQuadratic {
    /// `(1−Ls)(μs/4)(k+r)(2k+r) − (4k+3r+2) + r(1−μs)(k+r) − (μs(1−Ls)/4)(4k+3r+2)`
    /// expanded as `a k² + b k + c`, in exact arithmetic on the binary inputs.
    fn new(lipschitz: f64, mu: f64, s: f64, r: f64) -> Self {
        let q = |v: f64| BigRational::from_float(v).expect("finite input");
        let (l, m, s, r) = (q(lipschitz), q(mu), q(s), q(r));
        let one = BigRational::one();
        let two = &one + &one;
        let three = &two + &one;
        let four = &two + &two;
        let ls = &l * &s;
        let ms = &m * &s;
        let w = (&one - &ls) * &ms / &four;
        // (k+r)(2k+r) = 2k² + 3rk + r²
        let a = &w * &two;
        let b = &w * &three * &r - &four + &r * (&one - &ms) - &w * &four;
        let c = &w * &r * &r - (&three * &r + &two) + &r * &r * (&one - &ms) - &w * (&three * &r + &two);
        Self { a, b, c }
    }

    fn at(&self, k: u64) -> BigRational {
        let k = BigRational::from_integer(BigInt::from(k));
        (&self.a * &k + &self.b) * &k + &self.c
    }

    fn holds(&self, k: u64) -> bool {
        !self.at(k).is_negative()
    }
}

/// Smallest `K ≥ 1` (with `K + r > 0`) such that the threshold inequality
///
/// ```text
/// (1−Ls)(μs/4)(k+r)(2k+r) − (4k+3r+2) + r(1−μs)(k+r) ≥ (μs(1−Ls)/4)(4k+3r+2)
/// ```
///
/// holds for every `k ≥ K`.
///
/// The left-minus-right side is a convex quadratic in `k`, so the failing
/// integers form one contiguous block; `K` is the first integer after it.
/// The evaluation is exact, and the result is re-checked on the following
/// [`THRESHOLD_PERSISTENCE`] integers.
pub fn find_k(lipschitz: f64, mu: f64, s: f64, r: f64) -> Result<Threshold> {
    if !(mu > 0.0 && mu <= lipschitz && lipschitz.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < mu <= L, got mu = {mu}, L = {lipschitz}"
        )));
    }
    if !(s > 0.0 && s * lipschitz < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "step size {s} must lie in (0, 1/L)"
        )));
    }
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!("r must be finite, got {r}")));
    }
    let quad = ThresholdQuadratic::new(lipschitz, mu, s, r);
    if !quad.a.is_positive() {
        return Err(Error::InvalidParameter(
            "threshold quadratic has non-positive leading coefficient".into(),
        ));
    }
    // first index with k + r > 0 and k ≥ 1
    let k_min: u64 = if r > -1.0 { 1 } else { (-r).floor() as u64 + 1 };

    // integer nearest the vertex, from the right side of k_min
    let vertex = -&quad.b / (&quad.a * BigRational::from_integer(BigInt::from(2)));
    let v_floor = vertex.floor().to_integer().to_i128().unwrap_or(i128::MAX);
    let start = if v_floor < k_min as i128 {
        k_min
    } else {
        u64::try_from(v_floor).map_err(|_| Error::SearchOverflow { cap: THRESHOLD_SEARCH_CAP })?
    };
    let negative = [start, start + 1].into_iter().find(|&k| !quad.holds(k));

    let k = match negative {
        None => k_min,
        Some(lo) => {
            // exponential search for a passing index, then bisection
            let mut lo = lo;
            let mut step = 1u64;
            let mut hi = lo + step;
            while !quad.holds(hi) {
                lo = hi;
                step = step.saturating_mul(2);
                hi = lo.saturating_add(step);
                if hi > THRESHOLD_SEARCH_CAP {
                    return Err(Error::SearchOverflow { cap: THRESHOLD_SEARCH_CAP });
                }
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if quad.holds(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi.max(k_min)
        }
    };
    if let Some(bad) = (k..=k + THRESHOLD_PERSISTENCE).find(|&j| !quad.holds(j)) {
        return Err(Error::InvalidInput(format!(
            "threshold inequality fails at k = {bad} after K = {k}"
        )));
    }
    Ok(Threshold {
        k: usize::try_from(k).map_err(|_| Error::SearchOverflow { cap: THRESHOLD_SEARCH_CAP })?,
        leading_coefficient: quad.a.to_f64().unwrap_or(f64::NAN),
    })
}

/// Left-minus-right side of the threshold inequality, in floating point.
pub fn threshold_margin(lipschitz: f64, mu: f64, s: f64, r: f64, k: f64) -> f64 {
    let ls = lipschitz * s;
    let ms = mu * s;
    let w = (1.0 - ls) * ms / 4.0;
    w * (k + r) * (2.0 * k + r) - (4.0 * k + 3.0 * r + 2.0) + r * (1.0 - ms) * (k + r)
        - w * (4.0 * k + 3.0 * r + 2.0)
}

/// Anchor of the linear-rate bounds: the threshold, the energy there, and
/// the certified constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    pub k_threshold: usize,
    pub energy_at_k: f64,
    pub s: f64,
    pub r: f64,
    pub mu: f64,
    pub lipschitz: f64,
}

impl TheoremBound {
    pub fn new(k_threshold: usize, energy_at_k: f64, s: StepSize, r: f64, mu: f64) -> Self {
        Self {
            k_threshold,
            energy_at_k,
            s: s.value(),
            r,
            mu,
            lipschitz: s.lipschitz(),
        }
    }

    /// `1 + (1 − Ls)·μs/4`
    pub fn rate_base(&self) -> f64 {
        1.0 + self.rate_increment()
    }

    fn rate_increment(&self) -> f64 {
        (1.0 - self.lipschitz * self.s) * self.mu * self.s / 4.0
    }

    /// `rate_base^{k−K}`
    fn rate_power(&self, k: usize) -> f64 {
        ((k - self.k_threshold) as f64 * self.rate_increment().ln_1p()).exp()
    }

    fn check(&self, k: usize) -> Result<()> {
        if k < self.k_threshold {
            return Err(Error::Domain {
                k,
                threshold: self.k_threshold,
            });
        }
        Ok(())
    }

    fn poly(&self, k: usize) -> f64 {
        let k = k as f64;
        (k + self.r) * (2.0 * k + self.r)
    }

    /// `E(K) / (s(k+r)(2k+r)·rate_base^{k−K})`
    pub fn bound_f(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        Ok(self.energy_at_k / (self.s * self.poly(k) * self.rate_power(k)))
    }

    /// `4E(K) / (s²(1−Ls)(k+r)(2k+r)·rate_base^{k−K})`
    pub fn bound_grad(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        let ls = self.lipschitz * self.s;
        Ok(4.0 * self.energy_at_k / (self.s * self.s * (1.0 - ls) * self.poly(k) * self.rate_power(k)))
    }

    /// The same two bounds written through `α = sL`:
    /// `(L/α)·E(K)/((k+r)(2k+r)ρ^{k−K})` and `4L²E(K)/(α²(1−α)(k+r)(2k+r)ρ^{k−K})`
    /// with `ρ = 1 + α(1−α)μ/(4L)`.
    pub fn alpha_form(&self, k: usize) -> Result<(f64, f64)> {
        self.check(k)?;
        let l = self.lipschitz;
        let alpha = self.s * l;
        let inc = alpha * (1.0 - alpha) / 4.0 * self.mu / l;
        let pw = ((k - self.k_threshold) as f64 * inc.ln_1p()).exp();
        let base = self.poly(k) * pw;
        let f = (l / alpha) * self.energy_at_k / base;
        let g = 4.0 * l * l * self.energy_at_k / (alpha * alpha * (1.0 - alpha) * base);
        Ok((f, g))
    }
}

/// `(f(x_k) − f(x*) bound, ‖∇f(y_k)‖² bound)` for `k ≥ K`.
pub fn theorem1_bound(tb: &TheoremBound, k: usize) -> Result<(f64, f64)> {
    Ok((tb.bound_f(k)?, tb.bound_grad(k)?))
}

/// `(Φ(x_k) − Φ(x*) bound, ‖G_s(y_k)‖² bound)` for `k ≥ K`; same formulas as
/// [`theorem1_bound`].
pub fn theorem2_bound(tb: &TheoremBound, k: usize) -> Result<(f64, f64)> {
    theorem1_bound(tb, k)
}

/// A residual `rhs − lhs` of an inequality `lhs ≤ rhs`, with the magnitude
/// scale it should be judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityResidual {
    pub residual: f64,
    pub scale: f64,
}

/// Relative tolerance used by the inequality oracles.
pub const INEQUALITY_TOL: f64 = 1e-9;

impl InequalityResidual {
    /// `residual ≥ −tol·scale`
    pub fn holds(&self, tol: f64) -> bool {
        self.residual >= -tol * self.scale
    }
}

fn require_step(lipschitz: f64, s: f64) -> Result<()> {
    if !(s > 0.0 && s * lipschitz < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "s = {s} must lie in (0, 1/L) with L = {lipschitz}"
        )));
    }
    Ok(())
}

/// Residual of
/// `f(y − s∇f(y)) − f(x) ≤ ⟨∇f(y), y − x⟩ − (μ/2)‖y − x‖² − (s − Ls²/2)‖∇f(y)‖²`.
pub fn check_strong_smooth_inequality(
    problem: &SmoothProblem,
    x: &[f64],
    y: &[f64],
    s: f64,
) -> Result<InequalityResidual> {
    require_step(problem.lipschitz(), s)?;
    let g = problem.gradient(y);
    let y_plus = linalg::axpy(y, -s, &g);
    let f = problem.function();
    let lhs = f.gap(&y_plus, x);
    let d = linalg::sub(y, x);
    let inner = linalg::dot(&g, &d);
    let quad = 0.5 * problem.mu() * linalg::norm_sq(&d);
    let grad_term = (s - 0.5 * problem.lipschitz() * s * s) * linalg::norm_sq(&g);
    let rhs = inner - quad - grad_term;
    let scale = 1.0 + f.value(&y_plus).abs() + f.value(x).abs() + inner.abs() + quad + grad_term;
    Ok(InequalityResidual {
        residual: rhs - lhs,
        scale,
    })
}

/// Residual of `‖G_s(y)‖² ≥ 2μ(Φ(y − sG_s(y)) − Φ(x*))`.
pub fn check_subgradient_lower_bound(problem: &CompositeProblem, y: &[f64], s: f64) -> Result<InequalityResidual> {
    require_step(problem.lipschitz(), s)?;
    let p = Problem::Composite(problem.clone());
    let g = p.residual(y, s);
    let y_plus = p.forward_step(y, s);
    let lhs = linalg::norm_sq(&g);
    let rhs = 2.0 * problem.mu() * problem.gap(&y_plus)?;
    let scale = 1.0 + lhs.abs() + 2.0 * problem.mu() * (problem.value(&y_plus).abs() + problem.value(problem.minimizer()?).abs());
    Ok(InequalityResidual {
        residual: lhs - rhs,
        scale,
    })
}

/// Residual of
/// `Φ(y − sG_s(y)) − Φ(x) ≤ ⟨G_s(y), y − x⟩ − (s/2)‖G_s(y)‖² − (μ/2)‖y − x‖²`.
pub fn check_fundamental_proximal(
    problem: &CompositeProblem,
    x: &[f64],
    y: &[f64],
    s: f64,
) -> Result<InequalityResidual> {
    require_step(problem.lipschitz(), s)?;
    let p = Problem::Composite(problem.clone());
    let g = p.residual(y, s);
    let y_plus = p.forward_step(y, s);
    let lhs = problem.smooth().function().gap(&y_plus, x) + problem.penalty().gap(&y_plus, x);
    let d = linalg::sub(y, x);
    let inner = linalg::dot(&g, &d);
    let half_g = 0.5 * s * linalg::norm_sq(&g);
    let quad = 0.5 * problem.mu() * linalg::norm_sq(&d);
    let rhs = inner - half_g - quad;
    let scale = 1.0 + problem.value(&y_plus).abs() + problem.value(x).abs() + inner.abs() + half_g + quad;
    Ok(InequalityResidual {
        residual: rhs - lhs,
        scale,
    })
}

/// Relative tolerance of the contraction and bound-domination checks.
pub const CONTRACTION_TOL: f64 = 1e-8;

/// How finely `f64` iterates can resolve the certified quantities.
///
/// An iterate near `x*` is stored to within `δ = 4·eps·‖x*‖_∞` per
/// coordinate, so measured errors below these floors are rounding noise.
/// For `x* = 0` the floors vanish and every check is purely relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// `‖x − x*‖` resolution `√n·δ`.
    pub dist: f64,
    /// Floor of `f(x_k) − f(x*)` (or `Φ`).
    pub f: f64,
    /// Floor of `‖∇f(y_k)‖²` (or `‖G_s(y_k)‖²`).
    pub grad_sq: f64,
}

impl Resolution {
    /// All floors zero: the checks become strictly relative.
    pub const EXACT: Resolution = Resolution {
        dist: 0.0,
        f: 0.0,
        grad_sq: 0.0,
    };

    /// Floors for `problem` run with step `s`.
    pub fn of(problem: &Problem, s: f64) -> Result<Self> {
        let xs = problem.minimizer()?;
        let delta = 4.0 * f64::EPSILON * linalg::norm_inf(xs);
        let dist = (xs.len() as f64).sqrt() * delta;
        // oracle residual: x* is itself only a floating-point fixed point
        let res = linalg::norm(&problem.residual(xs, s));
        let f = (res + problem.lipschitz() * dist) * dist + problem.smooth().function().gap_rounding(xs);
        let g = res + 2.0 * dist / s;
        Ok(Self {
            dist,
            f,
            grad_sq: g * g,
        })
    }

    /// Floor of `E(k)`.
    pub fn energy(&self, k: usize, s: f64, r: f64, mu: f64) -> f64 {
        let k = k as f64;
        let km1 = (k - 1.0).max(0.0);
        let potential = s * (k + r) * (2.0 * k + r) / (1.0 - mu * s) * self.f;
        let kinetic = 2.0 * km1 * km1 * self.dist * self.dist;
        let m = (2.0 * km1 + r.abs()) * self.dist;
        potential.abs() + kinetic + 0.5 * m * m
    }
}

/// Factor a record is required to clear its floor by to count as resolved.
pub const RESOLVED_MARGIN: f64 = 100.0;

/// Result of [`lyapunov_contraction_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub first_k: usize,
    pub last_k: usize,
    pub steps_checked: usize,
    /// Steps whose `E(k)` clears its rounding floor by [`RESOLVED_MARGIN`].
    pub resolved_steps: usize,
    pub violations: usize,
    /// Largest `(E(k+1)·ρ − E(k)) / E(k)` over resolved steps, if any.
    pub max_violation: Option<f64>,
    pub passed: bool,
}

/// Checks `E(k+1)·rate_base ≤ E(k)·(1 + tol)` on consecutive records with
/// `k ∈ [K, K + window]`. A step only counts as a violation when the excess
/// also exceeds the rounding floors of both energies.
pub fn lyapunov_contraction_check(
    trace: &[TraceRecord],
    tb: &TheoremBound,
    window: usize,
    tol: f64,
    resolution: &Resolution,
) -> Result<ContractionReport> {
    let first = tb.k_threshold;
    let last = first + window;
    let sel: Vec<&TraceRecord> = trace.iter().filter(|r| r.k >= first && r.k <= last).collect();
    if sel.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need consecutive records in [{first}, {last}], found {}",
            sel.len()
        )));
    }
    let rho = tb.rate_base();
    let floor = |k: usize| resolution.energy(k, tb.s, tb.r, tb.mu);
    let mut rep = ContractionReport {
        first_k: sel[0].k,
        last_k: sel[sel.len() - 1].k,
        steps_checked: sel.len() - 1,
        resolved_steps: 0,
        violations: 0,
        max_violation: None,
        passed: false,
    };
    for pair in sel.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.k != a.k + 1 {
            return Err(Error::InvalidInput(format!(
                "trace gap between k = {} and k = {}",
                a.k, b.k
            )));
        }
        let (Some(ea), Some(eb)) = (a.lyapunov, b.lyapunov) else {
            return Err(Error::InvalidInput(format!(
                "missing Lyapunov value near k = {}",
                a.k
            )));
        };
        let excess = eb * rho - ea;
        let noise = floor(a.k) + rho * floor(b.k);
        if excess > tol * ea.abs() + noise {
            rep.violations += 1;
        }
        if ea > RESOLVED_MARGIN * floor(a.k) && ea > 0.0 {
            rep.resolved_steps += 1;
            let v = excess / ea;
            rep.max_violation = Some(rep.max_violation.map_or(v, |m| m.max(v)));
        }
    }
    rep.passed = rep.violations == 0;
    Ok(rep)
}

/// Result of checking the measured errors against the theorem bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub records_checked: usize,
    /// Records whose `f` bound clears the rounding floor by [`RESOLVED_MARGIN`].
    pub resolved_records: usize,
    /// Whether `E(K)` itself clears its floor; if not, the bounds only
    /// restate the floor.
    pub anchor_resolved: bool,
    pub f_violations: usize,
    pub grad_violations: usize,
    /// Largest `f_err / bound_f` over resolved records.
    pub max_f_ratio: f64,
    /// Largest residual-square over its bound, over resolved records.
    pub max_grad_ratio: f64,
    pub passed: bool,
}

/// `f_err ≤ bound_f·(1 + tol)` and `residual² ≤ bound_grad·(1 + tol)` on
/// every record carrying bounds, up to the rounding floors of the measured
/// error and of `E(K)` propagated through the bound.
pub fn check_domination(
    trace: &[TraceRecord],
    tb: &TheoremBound,
    tol: f64,
    resolution: &Resolution,
) -> DominationReport {
    let e_floor = resolution.energy(tb.k_threshold, tb.s, tb.r, tb.mu);
    let floor_bound = TheoremBound {
        energy_at_k: e_floor,
        ..*tb
    };
    let mut rep = DominationReport {
        records_checked: 0,
        resolved_records: 0,
        anchor_resolved: tb.energy_at_k > RESOLVED_MARGIN * e_floor && tb.energy_at_k > 0.0,
        f_violations: 0,
        grad_violations: 0,
        max_f_ratio: 0.0,
        max_grad_ratio: 0.0,
        passed: true,
    };
    for rec in trace {
        let (Some(bf), Some(bg)) = (rec.bound_f, rec.bound_grad) else {
            continue;
        };
        rep.records_checked += 1;
        // the bounds are linear in E(K); evaluate them at its floor
        let bf_noise = floor_bound.bound_f(rec.k).unwrap_or(0.0);
        let bg_noise = floor_bound.bound_grad(rec.k).unwrap_or(0.0);
        let f_slack = resolution.f + bf_noise;
        let g_slack = resolution.grad_sq + bg_noise;
        if rec.f_err > bf * (1.0 + tol) + f_slack {
            rep.f_violations += 1;
        }
        let resolved = bf > RESOLVED_MARGIN * f_slack;
        if resolved {
            rep.resolved_records += 1;
            rep.max_f_ratio = rep.max_f_ratio.max(rec.f_err / bf);
        }
        if let Some(g) = rec.residual_sq() {
            if g > bg * (1.0 + tol) + g_slack {
                rep.grad_violations += 1;
            }
            if resolved {
                rep.max_grad_ratio = rep.max_grad_ratio.max(g / bg);
            }
        }
    }
    rep.passed = rep.records_checked > 0 && rep.f_violations == 0 && rep.grad_violations == 0;
    rep
}

/// A run annotated with `E(k)`, the threshold, and both theorem bounds.
#[derive(Debug, Clone)]
pub struct CertifiedRun {
    pub trace: Trace,
    pub threshold: Threshold,
    pub bound: TheoremBound,
    pub resolution: Resolution,
}

impl CertifiedRun {
    pub fn domination(&self, tol: f64) -> DominationReport {
        check_domination(&self.trace.records, &self.bound, tol, &self.resolution)
    }

    pub fn contraction(&self, window: usize, tol: f64) -> Result<ContractionReport> {
        lyapunov_contraction_check(&self.trace.records, &self.bound, window, tol, &self.resolution)
    }
}

/// Runs Nesterov-1983 (or FISTA) and attaches `E(k)` to every record with
/// `k ≥ 1`, then the theorem bounds from the first recorded `k ≥ K` on.
pub fn certify_run(problem: &Problem, cfg: &RunConfig) -> Result<CertifiedRun> {
    let mu = problem.mu();
    let threshold = find_k(problem.lipschitz(), mu, cfg.s.value(), cfg.r)?;
    let mut trace = optimizers::run_observed(problem, cfg, |state, rec| {
        if state.k >= 1 {
            rec.lyapunov = Some(discrete_lyapunov(problem, state, mu)?.total);
        }
        Ok(())
    })?;
    let anchor = trace
        .records
        .iter()
        .find(|r| r.k >= threshold.k)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "run stops at k = {} before the threshold K = {}",
                trace.records.last().map(|r| r.k).unwrap_or(0),
                threshold.k
            ))
        })?;
    let energy = anchor.lyapunov.unwrap_or(0.0);
    let bound = TheoremBound::new(anchor.k, energy, cfg.s, cfg.r, mu);
    for rec in trace.records.iter_mut().filter(|r| r.k >= bound.k_threshold) {
        let (bf, bg) = theorem1_bound(&bound, rec.k)?;
        rec.bound_f = Some(bf);
        rec.bound_grad = Some(bg);
    }
    let resolution = Resolution::of(problem, cfg.s.value())?;
    Ok(CertifiedRun {
        trace,
        threshold,
        bound,
        resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{nesterov_step, Method};
    use crate::problems::{make_quadratic, Penalty};
    use approx::assert_relative_eq;

    fn half_square() -> SmoothProblem {
        make_quadratic(&[0.5], &[0.0]).unwrap()
    }

    #[test]
    fn energy_at_k1_has_no_velocity_terms() {
        let p = half_square();
        let s = StepSize::new(0.1, 1.0).unwrap();
        let st0 = OptimizerState::new(vec![1.0], 2.0, s);
        let st1 = nesterov_step(&p, &st0).unwrap();
        let e = discrete_lyapunov(&p.clone().into(), &st1, 1.0).unwrap();
        assert_eq!(e.kinetic, 0.0);
        let x1: f64 = 0.9;
        let expect_pot = 0.1 * 3.0 * 4.0 / 0.9 * 0.5 * x1 * x1;
        assert_relative_eq!(e.potential, expect_pot, max_relative = 1e-14);
        assert_relative_eq!(e.mixed, 0.5 * 4.0 * x1 * x1, max_relative = 1e-14);
    }

    #[test]
    fn energy_vanishes_at_rest_on_minimizer() {
        let p = make_quadratic(&[1.0, 3.0], &[0.5, -0.25]).unwrap();
        let s = StepSize::new(0.1, p.lipschitz()).unwrap();
        let mut st = OptimizerState::new(vec![0.5, -0.25], 2.0, s);
        st.k = 7;
        let e = discrete_lyapunov(&p.clone().into(), &st, p.mu()).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn energy_rejects_bad_inputs() {
        let p = half_square();
        let s = StepSize::new(0.1, 1.0).unwrap();
        let st = OptimizerState::new(vec![1.0], 2.0, s);
        assert!(matches!(discrete_lyapunov(&p.clone().into(), &st, 1.0), Err(Error::InvalidArgument(_))));
        let mut st = st;
        st.k = 3;
        assert!(matches!(discrete_lyapunov(&p.into(), &st, 10.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn threshold_quadratic_matches_float_margin() {
        let q = ThresholdQuadratic::new(1.0, 0.1, 0.5, 2.0);
        for k in [0u64, 5, 100, 169, 170, 1000] {
            let exact = q.at(k).to_f64().unwrap();
            let float = threshold_margin(1.0, 0.1, 0.5, 2.0, k as f64);
            assert!((exact - float).abs() < 1e-9 * (1.0 + float.abs()), "k = {k}");
        }
        assert_relative_eq!(q.a.to_f64().unwrap(), 0.0125, max_relative = 1e-12);
        assert_relative_eq!(q.b.to_f64().unwrap(), -2.0875, max_relative = 1e-12);
        assert_relative_eq!(q.c.to_f64().unwrap(), -4.225, max_relative = 1e-12);
    }

    #[test]
    fn find_k_positive_r_from_the_start() {
        // r = 5 makes every term positive already at k = 1
        let t = find_k(1.0, 0.5, 0.5, 5.0).unwrap();
        assert_eq!(t.k, 1);
    }

    #[test]
    fn find_k_respects_negative_r() {
        let t = find_k(1.0, 0.5, 0.5, -1.5).unwrap();
        assert!(t.k as f64 - 1.5 > 0.0);
    }

    #[test]
    fn find_k_edge_mu_equals_l() {
        let l = 1.0;
        let s = (1.0 - 1e-6) / l;
        let t = find_k(l, l, s, 2.0).unwrap();
        assert!(t.leading_coefficient > 0.0);
        let tb = TheoremBound::new(t.k, 1.0, StepSize::new(s, l).unwrap(), 2.0, l);
        assert!(tb.rate_base() > 1.0 && tb.rate_base() < 1.0 + 1e-6);
    }

    #[test]
    fn find_k_rejects_bad_parameters() {
        assert!(find_k(1.0, 2.0, 0.5, 2.0).is_err());
        assert!(find_k(1.0, 0.5, 1.0, 2.0).is_err());
        assert!(find_k(1.0, 0.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn bounds_at_and_after_k() {
        let s = StepSize::new(0.5, 1.0).unwrap();
        let tb = TheoremBound::new(10, 3.0, s, 2.0, 0.1);
        let (bf, _) = theorem1_bound(&tb, 10).unwrap();
        assert_relative_eq!(bf, 3.0 / (0.5 * 12.0 * 22.0), max_relative = 1e-15);
        let (bf1, _) = theorem1_bound(&tb, 11).unwrap();
        let ratio = bf / bf1;
        assert_relative_eq!(ratio, (13.0 * 24.0) / (12.0 * 22.0) * tb.rate_base(), max_relative = 1e-13);
        assert!(ratio > tb.rate_base());
        assert!(matches!(theorem1_bound(&tb, 9), Err(Error::Domain { k: 9, threshold: 10 })));
        assert_eq!(theorem2_bound(&tb, 40).unwrap(), theorem1_bound(&tb, 40).unwrap());
    }

    #[test]
    fn alpha_form_reproduces_bounds() {
        let s = StepSize::new(0.7, 1.3).unwrap();
        let tb = TheoremBound::new(50, 2.5, s, 3.0, 0.02);
        for k in [50, 51, 400, 5000] {
            let (f, g) = theorem1_bound(&tb, k).unwrap();
            let (fa, ga) = tb.alpha_form(k).unwrap();
            assert_relative_eq!(f, fa, max_relative = 1e-12);
            assert_relative_eq!(g, ga, max_relative = 1e-12);
        }
    }

    #[test]
    fn rate_base_exceeds_one() {
        for (l, mu, s) in [(1.0, 0.1, 0.5), (4.0, 0.01, 0.2), (1.0, 1.0, 0.99)] {
            let tb = TheoremBound::new(1, 1.0, StepSize::new(s, l).unwrap(), 2.0, mu);
            assert!(tb.rate_base() > 1.0);
        }
    }

    #[test]
    fn smooth_inequality_at_x_equals_y() {
        let p = make_quadratic(&[0.4, 1.5], &[1.0, -1.0]).unwrap();
        let s = 0.5 / p.lipschitz();
        let y = [0.3, 2.0];
        let res = check_strong_smooth_inequality(&p, &y, &y, s).unwrap();
        assert!(res.residual >= 0.0);
    }

    #[test]
    fn smooth_inequality_scalar_closed_form() {
        // f = ½μx², y = 1, x = 0, s = 1/(2L) with L = μ
        let mu = 0.8;
        let p = make_quadratic(&[mu / 2.0], &[0.0]).unwrap();
        let s = 1.0 / (2.0 * p.lipschitz());
        let res = check_strong_smooth_inequality(&p, &[0.0], &[1.0], s).unwrap();
        // lhs = ½μ(1 − μs)², rhs = μ − μ/2 − (s − μs²/2)μ²
        let lhs = 0.5 * mu * (1.0 - mu * s).powi(2);
        let rhs = mu - 0.5 * mu - (s - 0.5 * mu * s * s) * mu * mu;
        // tight: both sides equal μ/8
        assert!((res.residual - (rhs - lhs)).abs() < 1e-15);
        assert!(res.holds(INEQUALITY_TOL));
    }

    #[test]
    fn subgradient_lower_bound_closed_form() {
        // g ≡ 0, f = ½μy²: residual = μ²y²(1 − (1 − μs)²)
        let mu = 0.6;
        let f = make_quadratic(&[mu / 2.0], &[0.0]).unwrap();
        let c = CompositeProblem::new(f, Penalty::Zero).unwrap();
        let s = 0.9 / c.lipschitz();
        let y = 1.7;
        let res = check_subgradient_lower_bound(&c, &[y], s).unwrap();
        let expect = mu * mu * y * y * (1.0 - (1.0 - mu * s).powi(2));
        assert_relative_eq!(res.residual, expect, max_relative = 1e-12);
        let at_min = check_subgradient_lower_bound(&c, &[0.0], s).unwrap();
        assert_eq!(at_min.residual, 0.0);
    }

    #[test]
    fn fundamental_proximal_at_minimizer() {
        let f = make_quadratic(&[0.5], &[0.0]).unwrap();
        let c = CompositeProblem::new(f, Penalty::L1 { lambda: 1.0 }).unwrap();
        let res = check_fundamental_proximal(&c, &[0.0], &[0.0], 0.5).unwrap();
        assert_eq!(res.residual, 0.0);
    }

    #[test]
    fn checks_reject_bad_step() {
        let f = make_quadratic(&[0.5], &[0.0]).unwrap();
        assert!(check_strong_smooth_inequality(&f, &[0.0], &[1.0], 1.0).is_err());
    }

    fn rec(k: usize, e: f64) -> TraceRecord {
        TraceRecord {
            k,
            f_err: 0.0,
            grad_sq: Some(0.0),
            prox_grad_sq: None,
            lyapunov: Some(e),
            bound_f: None,
            bound_grad: None,
        }
    }

    #[test]
    fn contraction_on_constant_zero_trace_passes() {
        let tb = TheoremBound::new(5, 0.0, StepSize::new(0.5, 1.0).unwrap(), 2.0, 0.1);
        let trace: Vec<TraceRecord> = (0..20).map(|k| rec(k, 0.0)).collect();
        let rep = lyapunov_contraction_check(&trace, &tb, 10, CONTRACTION_TOL, &Resolution::EXACT).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.steps_checked, 10);
    }

    #[test]
    fn contraction_detects_growth_and_gaps() {
        let tb = TheoremBound::new(0, 1.0, StepSize::new(0.5, 1.0).unwrap(), 2.0, 0.1);
        let trace: Vec<TraceRecord> = (0..5).map(|k| rec(k, 1.0)).collect();
        let rep = lyapunov_contraction_check(&trace, &tb, 4, CONTRACTION_TOL, &Resolution::EXACT).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.violations, 4);

        let gappy = vec![rec(0, 1.0), rec(2, 0.5)];
        assert!(matches!(
            lyapunov_contraction_check(&gappy, &tb, 4, CONTRACTION_TOL, &Resolution::EXACT),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn certify_small_quadratic() {
        let q: Problem = make_quadratic(&[0.5, 2.5], &[0.0, 0.0]).unwrap().into();
        let s = StepSize::fraction_of_inverse(0.9, q.lipschitz()).unwrap();
        let cfg = RunConfig::new(Method::Nesterov, s, 2.0, vec![1.0, 1.0], 800);
        let run = certify_run(&q, &cfg).unwrap();
        assert_eq!(run.resolution, Resolution::EXACT);
        let dom = run.domination(CONTRACTION_TOL);
        assert!(dom.passed && dom.anchor_resolved, "{dom:?}");
        let con = run.contraction(300, CONTRACTION_TOL).unwrap();
        assert!(con.passed, "{con:?}");
    }
}
