//! Objective functions, their oracles, and the `s`-proximal operators.
//!
//! A [`SmoothProblem`] is a `μ`-strongly convex, `L`-smooth function
//! together with its certified constants. A [`CompositeProblem`] adds a
//! simple convex [`Penalty`] `g`, giving `Φ = f + g`. Both are immutable
//! once built and can be shared across threads; the only interior state is
//! a write-once cache for the minimizer.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{self, Lcg64};

/// Value, gradient and (optionally) Hessian-vector oracles of a smooth function.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// `∇²f(x) v`, when an analytic form exists.
    fn hessian_vec(&self, _x: &[f64], _v: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `f(x) - f(reference)`.
    ///
    /// Implementations override this when the difference can be formed
    /// without cancellation, which matters once iterates sit within a few
    /// ulps of the minimizer.
    fn gap(&self, x: &[f64], reference: &[f64]) -> f64 {
        self.value(x) - self.value(reference)
    }

    /// Absolute rounding error of [`SmoothFunction::gap`] that does not shrink
    /// with the gap itself. Zero for the cancellation-free overrides.
    fn gap_rounding(&self, reference: &[f64]) -> f64 {
        8.0 * f64::EPSILON * (1.0 + self.value(reference).abs())
    }

    /// Closed-form minimizer, if known.
    fn known_minimizer(&self) -> Option<Vec<f64>> {
        None
    }
}

/// `f(x) = Σ cᵢ (xᵢ - shiftᵢ)²`.
#[derive(Debug, Clone)]
pub struct SeparableQuadratic {
    coeffs: Vec<f64>,
    shift: Vec<f64>,
}

impl SeparableQuadratic {
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }
}

impl SmoothFunction for SeparableQuadratic {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(x.iter().zip(&self.shift))
            .map(|(c, (xi, si))| c * (xi - si) * (xi - si))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(x.iter().zip(&self.shift))
            .map(|(c, (xi, si))| 2.0 * c * (xi - si))
            .collect()
    }

    fn hessian_vec(&self, _x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(self.coeffs.iter().zip(v).map(|(c, vi)| 2.0 * c * vi).collect())
    }

    fn gap(&self, x: &[f64], reference: &[f64]) -> f64 {
        // c[(x-a)² - (r-a)²] = c (x - r)(x + r - 2a), one rounding per factor
        self.coeffs
            .iter()
            .zip(x.iter().zip(reference))
            .zip(&self.shift)
            .map(|((c, (xi, ri)), si)| c * (xi - ri) * ((xi - si) + (ri - si)))
            .sum()
    }

    fn gap_rounding(&self, _reference: &[f64]) -> f64 {
        0.0
    }

    fn known_minimizer(&self) -> Option<Vec<f64>> {
        Some(self.shift.clone())
    }
}

/// Circular convolution `(Ax)ᵢ = Σⱼ hⱼ x₍ᵢ₊ⱼ₋ₘ₎ mod n` with a centred kernel (`m = len/2`).
#[derive(Debug, Clone)]
pub struct CircularConvolution {
    kernel: Vec<f64>,
    n: usize,
}

impl CircularConvolution {
    pub fn new(kernel: Vec<f64>, n: usize) -> Result<Self> {
        if kernel.is_empty() || n == 0 {
            return Err(Error::InvalidProblem(
                "convolution needs a non-empty kernel and signal".into(),
            ));
        }
        Ok(Self { kernel, n })
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let m = self.kernel.len() / 2;
        // i + j - m, wrapped
        (i + j + self.n * (m / self.n + 1) - m) % self.n
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.kernel
                    .iter()
                    .enumerate()
                    .map(|(j, h)| h * x[self.offset(i, j)])
                    .sum()
            })
            .collect()
    }

    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, yi) in y.iter().enumerate() {
            for (j, h) in self.kernel.iter().enumerate() {
                out[self.offset(i, j)] += h * yi;
            }
        }
        out
    }
}

/// `f(x) = ½‖Ax − b‖² + (ridge/2)‖x‖²` for a circular blur `A`.
#[derive(Debug, Clone)]
pub struct RidgeDeconvolution {
    op: CircularConvolution,
    observed: Vec<f64>,
    ridge: f64,
}

impl RidgeDeconvolution {
    pub fn operator(&self) -> &CircularConvolution {
        &self.op
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    fn normal_apply(&self, v: &[f64]) -> Vec<f64> {
        let atav = self.op.apply_adjoint(&self.op.apply(v));
        linalg::axpy(&atav, self.ridge, v)
    }
}

impl SmoothFunction for RidgeDeconvolution {
    fn dim(&self) -> usize {
        self.op.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = linalg::sub(&self.op.apply(x), &self.observed);
        0.5 * linalg::norm_sq(&r) + 0.5 * self.ridge * linalg::norm_sq(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = linalg::sub(&self.op.apply(x), &self.observed);
        linalg::axpy(&self.op.apply_adjoint(&r), self.ridge, x)
    }

    fn hessian_vec(&self, _x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        Some(self.normal_apply(v))
    }

    fn gap(&self, x: &[f64], reference: &[f64]) -> f64 {
        // exact second-order expansion around the reference point
        let d = linalg::sub(x, reference);
        let g = self.gradient(reference);
        linalg::dot(&g, &d)
            + 0.5 * (linalg::norm_sq(&self.op.apply(&d)) + self.ridge * linalg::norm_sq(&d))
    }

    fn gap_rounding(&self, _reference: &[f64]) -> f64 {
        0.0
    }
}

/// `f(x) = log Σᵢ exp(⟨aᵢ, x⟩ − bᵢ) + (ridge/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct LogSumExpRidge {
    rows: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    ridge: f64,
}

impl LogSumExpRidge {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| linalg::dot(a, x) - b)
            .collect()
    }

    fn softmax(&self, x: &[f64]) -> Vec<f64> {
        let z = self.logits(x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|zi| (zi - m).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|ei| ei / total).collect()
    }

    fn apply_t(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (a, wi) in self.rows.iter().zip(w) {
            for (o, aj) in out.iter_mut().zip(a) {
                *o += wi * aj;
            }
        }
        out
    }
}

impl SmoothFunction for LogSumExpRidge {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let z = self.logits(x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|zi| (zi - m).exp()).sum::<f64>().ln();
        lse + 0.5 * self.ridge * linalg::norm_sq(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = self.softmax(x);
        linalg::axpy(&self.apply_t(&p), self.ridge, x)
    }

    fn hessian_vec(&self, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let p = self.softmax(x);
        let av: Vec<f64> = self.rows.iter().map(|a| linalg::dot(a, v)).collect();
        let mean = linalg::dot(&p, &av);
        let w: Vec<f64> = p.iter().zip(&av).map(|(pi, ai)| pi * (ai - mean)).collect();
        Some(linalg::axpy(&self.apply_t(&w), self.ridge, v))
    }
}

/// Step size `s ∈ (0, 1/L)`. `α = sL` is derived on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    s: f64,
    lipschitz: f64,
}

impl StepSize {
    pub fn new(s: f64, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        if !(s > 0.0 && s * lipschitz < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step size s = {s} must lie in (0, 1/L) with L = {lipschitz}"
            )));
        }
        Ok(Self { s, lipschitz })
    }

    /// `s = fraction / L`, e.g. `0.9 / L`.
    pub fn fraction_of_inverse(fraction: f64, lipschitz: f64) -> Result<Self> {
        Self::new(fraction / lipschitz, lipschitz)
    }

    pub fn value(&self) -> f64 {
        self.s
    }

    pub fn sqrt(&self) -> f64 {
        self.s.sqrt()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn alpha(&self) -> f64 {
        self.s * self.lipschitz
    }
}

/// A `μ`-strongly convex, `L`-smooth objective with certified constants.
#[derive(Debug, Clone)]
pub struct SmoothProblem {
    function: Arc<dyn SmoothFunction>,
    mu: f64,
    lipschitz: f64,
    minimizer: OnceLock<Vec<f64>>,
    quadratic: Option<SeparableQuadratic>,
}

impl SmoothProblem {
    /// Wraps a function with its certified `μ` and `L`.
    pub fn new(function: Arc<dyn SmoothFunction>, mu: f64, lipschitz: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= lipschitz && lipschitz.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "need 0 < mu <= L, got mu = {mu}, L = {lipschitz}"
            )));
        }
        let minimizer = OnceLock::new();
        if let Some(xs) = function.known_minimizer() {
            let _ = minimizer.set(xs);
        }
        Ok(Self {
            function,
            mu,
            lipschitz,
            minimizer,
            quadratic: None,
        })
    }

    pub fn function(&self) -> &dyn SmoothFunction {
        self.function.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.function.value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.function.gradient(x)
    }

    pub fn hessian_vec(&self, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        self.function.hessian_vec(x, v)
    }

    /// Minimizer, computed on first use when no closed form exists.
    pub fn minimizer(&self) -> Result<&[f64]> {
        if let Some(xs) = self.minimizer.get() {
            return Ok(xs);
        }
        let xs = smooth_minimizer(self, default_minimizer_tol(self.dim()))?;
        Ok(self.minimizer.get_or_init(|| xs))
    }

    /// `f(x) − f(x*)`.
    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        let xs = self.minimizer()?;
        Ok(self.function.gap(x, xs))
    }

    /// The diagonal quadratic this problem was built from, if any.
    pub fn as_separable_quadratic(&self) -> Option<&SeparableQuadratic> {
        self.quadratic.as_ref()
    }
}

/// The non-smooth part `g` of a composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `g ≡ 0`
    Zero,
    /// `g(x) = λ‖x‖₁`
    L1 { lambda: f64 },
}

impl Penalty {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// `argmin_y ‖y − z‖²/(2s) + g(y)`; `s` must be positive.
    pub fn prox(&self, z: &[f64], s: f64) -> Vec<f64> {
        match *self {
            Penalty::Zero => z.to_vec(),
            Penalty::L1 { lambda } => z.iter().map(|&zi| soft_threshold(zi, lambda * s)).collect(),
        }
    }

    /// `g(x) − g(reference)`, componentwise to avoid cancellation.
    pub fn gap(&self, x: &[f64], reference: &[f64]) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::L1 { lambda } => {
                lambda
                    * x.iter()
                        .zip(reference)
                        .map(|(a, b)| a.abs() - b.abs())
                        .sum::<f64>()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Penalty::Zero | Penalty::L1 { lambda: 0.0 })
    }
}

/// `(|z| − t)₊ sgn(z)`
pub fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// `Φ = f + g` with `f` strongly convex and `g` a simple convex penalty.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    smooth: SmoothProblem,
    penalty: Penalty,
    minimizer: OnceLock<Vec<f64>>,
    observed: Option<Vec<f64>>,
}

impl CompositeProblem {
    pub fn new(smooth: SmoothProblem, penalty: Penalty) -> Result<Self> {
        if let Penalty::L1 { lambda } = penalty {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "l1 weight must be non-negative, got {lambda}"
                )));
            }
        }
        let minimizer = OnceLock::new();
        if penalty.is_zero() {
            if let Some(xs) = smooth.minimizer.get() {
                let _ = minimizer.set(xs.clone());
            }
        }
        Ok(Self {
            smooth,
            penalty,
            minimizer,
            observed: None,
        })
    }

    pub fn smooth(&self) -> &SmoothProblem {
        &self.smooth
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    /// Same smooth part with the penalty replaced.
    pub fn with_penalty(&self, penalty: Penalty) -> Result<Self> {
        let mut out = Self::new(self.smooth.clone(), penalty)?;
        out.observed = self.observed.clone();
        Ok(out)
    }

    /// Blurred, noisy observation for deblurring instances.
    pub fn observed(&self) -> Option<&[f64]> {
        self.observed.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn mu(&self) -> f64 {
        self.smooth.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.smooth.lipschitz
    }

    /// `Φ(x) = f(x) + g(x)`
    pub fn value(&self, x: &[f64]) -> f64 {
        self.smooth.value(x) + self.penalty.value(x)
    }

    pub fn minimizer(&self) -> Result<&[f64]> {
        if let Some(xs) = self.minimizer.get() {
            return Ok(xs);
        }
        let xs = composite_minimizer(self, default_minimizer_tol(self.dim()))?;
        Ok(self.minimizer.get_or_init(|| xs))
    }

    /// `Φ(x) − Φ(x*)`.
    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        let xs = self.minimizer()?;
        Ok(self.smooth.function.gap(x, xs) + self.penalty.gap(x, xs))
    }
}

/// Either kind of problem; optimizers and certificates accept both.
#[derive(Debug, Clone)]
pub enum Problem {
    Smooth(SmoothProblem),
    Composite(CompositeProblem),
}

impl From<SmoothProblem> for Problem {
    fn from(p: SmoothProblem) -> Self {
        Problem::Smooth(p)
    }
}

impl From<CompositeProblem> for Problem {
    fn from(p: CompositeProblem) -> Self {
        Problem::Composite(p)
    }
}

impl Problem {
    pub fn smooth(&self) -> &SmoothProblem {
        match self {
            Problem::Smooth(p) => p,
            Problem::Composite(c) => &c.smooth,
        }
    }

    pub fn penalty(&self) -> Penalty {
        match self {
            Problem::Smooth(_) => Penalty::Zero,
            Problem::Composite(c) => c.penalty,
        }
    }

    pub fn is_composite(&self) -> bool {
        matches!(self, Problem::Composite(_))
    }

    pub fn dim(&self) -> usize {
        self.smooth().dim()
    }

    pub fn mu(&self) -> f64 {
        self.smooth().mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.smooth().lipschitz
    }

    /// `f(x)` or `Φ(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Smooth(p) => p.value(x),
            Problem::Composite(c) => c.value(x),
        }
    }

    pub fn minimizer(&self) -> Result<&[f64]> {
        match self {
            Problem::Smooth(p) => p.minimizer(),
            Problem::Composite(c) => c.minimizer(),
        }
    }

    /// `f(x) − f(x*)` or `Φ(x) − Φ(x*)`.
    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        match self {
            Problem::Smooth(p) => p.gap(x),
            Problem::Composite(c) => c.gap(x),
        }
    }

    /// One forward step from `y`: `y − s∇f(y)` for smooth problems,
    /// `P_s(y)` for composite ones.
    pub fn forward_step(&self, y: &[f64], s: f64) -> Vec<f64> {
        let z = linalg::axpy(y, -s, &self.smooth().gradient(y));
        match self {
            Problem::Smooth(_) => z,
            Problem::Composite(c) => c.penalty.prox(&z, s),
        }
    }

    /// `∇f(y)` for smooth problems, `G_s(y)` for composite ones.
    pub fn residual(&self, y: &[f64], s: f64) -> Vec<f64> {
        match self {
            Problem::Smooth(p) => p.gradient(y),
            Problem::Composite(_) => {
                let p = self.forward_step(y, s);
                y.iter().zip(&p).map(|(a, b)| (a - b) / s).collect()
            }
        }
    }
}

/// Default minimizer tolerance `10⁻¹²·(1 + ‖x₀‖)` with `x₀ = 0`.
pub fn default_minimizer_tol(_dim: usize) -> f64 {
    1e-12
}

/// Iteration cap for [`minimizer_oracle`].
pub const MINIMIZER_MAX_ITER: usize = 10_000_000;

/// `f(x) = Σ cᵢ (xᵢ − shiftᵢ)²` with `μ = 2 min cᵢ`, `L = 2 max cᵢ`, `x* = shift`.
pub fn make_quadratic(coeffs: &[f64], shift: &[f64]) -> Result<SmoothProblem> {
    if coeffs.is_empty() {
        return Err(Error::InvalidProblem("empty diagonal".into()));
    }
    if coeffs.len() != shift.len() {
        return Err(Error::InvalidProblem(format!(
            "diagonal has {} entries but shift has {}",
            coeffs.len(),
            shift.len()
        )));
    }
    if let Some(c) = coeffs.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidProblem(format!(
            "diagonal entries must be positive, got {c}"
        )));
    }
    let min = coeffs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = coeffs.iter().cloned().fold(0.0, f64::max);
    let quad = SeparableQuadratic {
        coeffs: coeffs.to_vec(),
        shift: shift.to_vec(),
    };
    let mut p = SmoothProblem::new(Arc::new(quad.clone()), 2.0 * min, 2.0 * max)?;
    p.quadratic = Some(quad);
    Ok(p)
}

/// Parameters of the 1-D deblurring LASSO instance.
#[derive(Debug, Clone)]
pub struct DeblurSpec {
    pub kernel: Vec<f64>,
    pub true_signal: Vec<f64>,
    pub noise_seed: u64,
    /// Standard deviation of the additive observation noise.
    pub noise_std: f64,
    pub lambda: f64,
    pub ridge: f64,
}

impl DeblurSpec {
    pub fn new(kernel: Vec<f64>, true_signal: Vec<f64>, noise_seed: u64, lambda: f64, ridge: f64) -> Self {
        Self {
            kernel,
            true_signal,
            noise_seed,
            noise_std: 0.01,
            lambda,
            ridge,
        }
    }
}

/// Piecewise-constant test signal of length `n`: a unit block on
/// `[n/4, 3n/8)` and a `−½` block on `[5n/8, 11n/16)`, zero elsewhere.
pub fn blocky_signal(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if (n / 4..3 * n / 8).contains(&i) {
                1.0
            } else if (5 * n / 8..11 * n / 16).contains(&i) {
                -0.5
            } else {
                0.0
            }
        })
        .collect()
}

/// Power-iteration settings used to estimate `L`.
pub const POWER_ITERATION_STEPS: usize = 200;
pub const POWER_ITERATION_TOL: f64 = 1e-8;
/// Relative inflation applied to the estimated `L`.
pub const LIPSCHITZ_INFLATION: f64 = 1.01;

/// Largest eigenvalue of a symmetric positive semidefinite operator.
pub fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, dim: usize, seed: u64) -> f64 {
    let mut rng = Lcg64::new(seed);
    let mut v = rng.vector(dim, -1.0, 1.0);
    let n = linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATION_STEPS {
        let w = apply(&v);
        let rayleigh = linalg::dot(&v, &w);
        let wn = linalg::norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        v = linalg::scale(1.0 / wn, &w);
        let done = (rayleigh - estimate).abs() <= POWER_ITERATION_TOL * rayleigh.abs();
        estimate = rayleigh;
        if done {
            break;
        }
    }
    estimate
}

/// 1-D deblurring LASSO: `f(x) = ½‖Ax − b‖² + (ridge/2)‖x‖²`, `g = λ‖·‖₁`,
/// with `b = A·signal + noise`.
///
/// `μ` is the ridge weight alone; `L` comes from power iteration on
/// `AᵀA + ridge·I`, inflated by 1%.
pub fn make_lasso_deblur(spec: &DeblurSpec) -> Result<CompositeProblem> {
    if spec.kernel.is_empty() || spec.true_signal.is_empty() {
        return Err(Error::InvalidProblem(
            "kernel and signal must be non-empty".into(),
        ));
    }
    if !(spec.ridge > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "ridge must be positive, got {}",
            spec.ridge
        )));
    }
    if !(spec.lambda >= 0.0) {
        return Err(Error::InvalidProblem(format!(
            "lambda must be non-negative, got {}",
            spec.lambda
        )));
    }
    let n = spec.true_signal.len();
    let op = CircularConvolution::new(spec.kernel.clone(), n)?;
    let mut rng = Lcg64::new(spec.noise_seed);
    let observed: Vec<f64> = op
        .apply(&spec.true_signal)
        .into_iter()
        .map(|v| v + spec.noise_std * rng.approx_normal())
        .collect();
    let function = RidgeDeconvolution {
        op,
        observed: observed.clone(),
        ridge: spec.ridge,
    };
    let top = power_iteration(|v| function.normal_apply(v), n, spec.noise_seed ^ 0x9e37_79b9);
    let lipschitz = top.max(spec.ridge) * LIPSCHITZ_INFLATION;
    let smooth = SmoothProblem::new(Arc::new(function), spec.ridge, lipschitz)?;
    let penalty = if spec.lambda == 0.0 {
        Penalty::Zero
    } else {
        Penalty::L1 { lambda: spec.lambda }
    };
    let mut out = CompositeProblem::new(smooth, penalty)?;
    out.observed = Some(observed);
    Ok(out)
}

/// Smooth log-sum-exp plus ridge term over the given rows; `μ = ridge`,
/// `L = ridge + λ_max(AᵀA)` (power iteration, inflated by 1%).
pub fn make_logsumexp_ridge(rows: Vec<Vec<f64>>, offsets: Vec<f64>, ridge: f64) -> Result<SmoothProblem> {
    if rows.is_empty() || rows[0].is_empty() || rows.len() != offsets.len() {
        return Err(Error::InvalidProblem(
            "need at least one row and one offset per row".into(),
        ));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidProblem("rows have differing lengths".into()));
    }
    if !(ridge > 0.0) {
        return Err(Error::InvalidProblem(format!("ridge must be positive, got {ridge}")));
    }
    let f = LogSumExpRidge { rows, offsets, ridge };
    let ata = |v: &[f64]| {
        let av: Vec<f64> = f.rows.iter().map(|a| linalg::dot(a, v)).collect();
        f.apply_t(&av)
    };
    let top = power_iteration(ata, d, 0x5eed);
    let lipschitz = (ridge + top) * LIPSCHITZ_INFLATION;
    SmoothProblem::new(Arc::new(f), ridge, lipschitz)
}

/// `argmin_y ‖y − z‖²/(2s) + g(y)`.
pub fn prox_g(problem: &CompositeProblem, z: &[f64], s: f64) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "prox parameter must be positive, got {s}"
        )));
    }
    Ok(problem.penalty.prox(z, s))
}

fn check_step(problem: &CompositeProblem, s: StepSize) -> Result<()> {
    if s.value() * problem.lipschitz() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "step size {} is not below 1/L = {}",
            s.value(),
            1.0 / problem.lipschitz()
        )));
    }
    Ok(())
}

/// `P_s(x) = prox_g(x − s∇f(x), s)`.
pub fn proximal_step(problem: &CompositeProblem, x: &[f64], s: StepSize) -> Result<Vec<f64>> {
    check_step(problem, s)?;
    let z = linalg::axpy(x, -s.value(), &problem.smooth.gradient(x));
    prox_g(problem, &z, s.value())
}

/// `G_s(x) = (x − P_s(x))/s`.
pub fn proximal_subgradient(problem: &CompositeProblem, x: &[f64], s: StepSize) -> Result<Vec<f64>> {
    let p = proximal_step(problem, x, s)?;
    Ok(x.iter().zip(&p).map(|(a, b)| (a - b) / s.value()).collect())
}

/// Minimizer of `f` or `Φ` with `‖∇f(x̂)‖ ≤ tol` (resp. `‖G_s(x̂)‖ ≤ tol`).
///
/// Closed form for diagonal quadratics; otherwise proximal-gradient
/// descent from the origin with `s = 0.999/L`.
pub fn minimizer_oracle(problem: &Problem, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    match problem {
        Problem::Smooth(p) => smooth_minimizer(p, tol),
        Problem::Composite(c) => composite_minimizer(c, tol),
    }
}

fn smooth_minimizer(p: &SmoothProblem, tol: f64) -> Result<Vec<f64>> {
    if let Some(xs) = p.function.known_minimizer() {
        return Ok(xs);
    }
    descend(&Problem::Smooth(p.clone()), tol, MINIMIZER_MAX_ITER)
}

fn composite_minimizer(c: &CompositeProblem, tol: f64) -> Result<Vec<f64>> {
    if c.penalty.is_zero() {
        if let Some(xs) = c.smooth.function.known_minimizer() {
            return Ok(xs);
        }
    }
    descend(&Problem::Composite(c.clone()), tol, MINIMIZER_MAX_ITER)
}

/// Iterations without residual improvement after which polishing stops.
const POLISH_PATIENCE: usize = 200;

fn descend(problem: &Problem, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let s = 0.999 / problem.lipschitz();
    let mut x = vec![0.0; problem.dim()];
    let mut best = (f64::INFINITY, x.clone());
    // once below tol, keep iterating to a floating-point fixed point
    let mut stale = 0usize;
    let mut reached = false;
    for _ in 0..max_iter {
        let res = linalg::norm(&problem.residual(&x, s));
        if res < best.0 {
            best = (res, x.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        reached |= res <= tol;
        if reached && (res == 0.0 || stale >= POLISH_PATIENCE) {
            return Ok(best.1);
        }
        let next = problem.forward_step(&x, s);
        if reached && next == x {
            return Ok(best.1);
        }
        x = next;
    }
    if reached {
        return Ok(best.1);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: best.0,
        best: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_l1(lambda: f64) -> CompositeProblem {
        // f = ½x², g = λ|x|
        let f = make_quadratic(&[0.5], &[0.0]).unwrap();
        CompositeProblem::new(f, Penalty::L1 { lambda }).unwrap()
    }

    #[test]
    fn slow_quadratic_constants() {
        let p = make_quadratic(&[2e-2, 5e-4], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(p.mu(), 1e-3);
        assert_relative_eq!(p.lipschitz(), 4e-2);
        assert_eq!(p.minimizer().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn half_square() {
        let p = make_quadratic(&[0.5], &[0.0]).unwrap();
        assert_eq!(p.gradient(&[3.0]), vec![3.0]);
        assert_eq!(p.value(&[3.0]), 4.5);
        assert_eq!(p.mu(), 1.0);
    }

    #[test]
    fn shifted_minimum() {
        let p = make_quadratic(&[1.0, 1.0], &[1.0, -2.0]).unwrap();
        let xs = p.minimizer().unwrap().to_vec();
        assert_eq!(xs, vec![1.0, -2.0]);
        assert_eq!(p.value(&xs), 0.0);
        assert_eq!(minimizer_oracle(&p.into(), 1e-12).unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn rejects_non_positive_diagonal() {
        assert!(matches!(make_quadratic(&[1.0, 0.0], &[0.0, 0.0]), Err(Error::InvalidProblem(_))));
        assert!(matches!(make_quadratic(&[-1.0], &[0.0]), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn soft_threshold_examples() {
        let c = scalar_l1(1.0);
        // λs = 1
        assert_eq!(prox_g(&c, &[2.0, -0.5], 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(prox_g(&c, &[1.0, -1.0], 1.0).unwrap(), vec![0.0, 0.0]);
        let z = CompositeProblem::new(make_quadratic(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), Penalty::Zero).unwrap();
        assert_eq!(prox_g(&z, &[0.3, -7.0], 0.2).unwrap(), vec![0.3, -7.0]);
    }

    #[test]
    fn prox_rejects_non_positive_parameter() {
        let c = scalar_l1(1.0);
        assert!(matches!(prox_g(&c, &[1.0], 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(prox_g(&c, &[1.0], -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn proximal_step_hand_example() {
        // f = ½x², λ = 1, x = 2, s = 0.5: z = 1, P = 0.5, G = 3.
        // s must be below 1/L = 1 here.
        let c = scalar_l1(1.0);
        let s = StepSize::new(0.5, c.lipschitz()).unwrap();
        assert_eq!(proximal_step(&c, &[2.0], s).unwrap(), vec![0.5]);
        assert_eq!(proximal_subgradient(&c, &[2.0], s).unwrap(), vec![3.0]);
    }

    #[test]
    fn zero_penalty_reduces_to_gradient() {
        let f = make_quadratic(&[0.3, 2.0, 0.7], &[1.0, 0.5, -1.0]).unwrap();
        let c = CompositeProblem::new(f.clone(), Penalty::Zero).unwrap();
        let s = StepSize::new(0.2, c.lipschitz()).unwrap();
        let x = [0.4, -1.3, 2.2];
        let p = proximal_step(&c, &x, s).unwrap();
        let expect = linalg::axpy(&x, -0.2, &f.gradient(&x));
        assert_eq!(p, expect);
        let g = proximal_subgradient(&c, &x, s).unwrap();
        for (a, b) in g.iter().zip(f.gradient(&x)) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn step_size_validation() {
        assert!(StepSize::new(0.5, 1.0).is_ok());
        assert!(StepSize::new(1.0, 1.0).is_err());
        assert!(StepSize::new(0.0, 1.0).is_err());
        assert_relative_eq!(StepSize::new(0.25, 2.0).unwrap().alpha(), 0.5);
    }

    #[test]
    fn deblur_rejects_empty_inputs() {
        let spec = DeblurSpec::new(vec![], vec![1.0], 0, 0.1, 1.0);
        assert!(matches!(make_lasso_deblur(&spec), Err(Error::InvalidProblem(_))));
        let spec = DeblurSpec::new(vec![1.0], vec![], 0, 0.1, 1.0);
        assert!(matches!(make_lasso_deblur(&spec), Err(Error::InvalidProblem(_))));
        let spec = DeblurSpec::new(vec![1.0], vec![1.0], 0, 0.1, 0.0);
        assert!(matches!(make_lasso_deblur(&spec), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn convolution_adjoint_matches_transpose() {
        let op = CircularConvolution::new(vec![0.2, 0.5, 0.3, 0.1], 7).unwrap();
        let mut rng = Lcg64::new(3);
        let x = rng.vector(7, -1.0, 1.0);
        let y = rng.vector(7, -1.0, 1.0);
        assert_relative_eq!(
            linalg::dot(&op.apply(&x), &y),
            linalg::dot(&x, &op.apply_adjoint(&y)),
            max_relative = 1e-14
        );
    }

    #[test]
    fn identity_kernel_is_identity() {
        let op = CircularConvolution::new(vec![1.0], 5).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(op.apply(&x), x.to_vec());
    }

    #[test]
    fn gap_overrides_agree_with_direct_difference() {
        let q = make_quadratic(&[0.3, 2.0], &[1.0, -0.5]).unwrap();
        let x = [0.2, 0.9];
        let r = [1.5, -0.1];
        let direct = q.value(&x) - q.value(&r);
        assert_relative_eq!(q.function().gap(&x, &r), direct, max_relative = 1e-13);

        let spec = DeblurSpec::new(vec![0.25, 0.5, 0.25], vec![1.0, 0.0, -2.0, 0.5, 0.0, 0.0], 9, 0.0, 0.5);
        let c = make_lasso_deblur(&spec).unwrap();
        let f = c.smooth().function();
        let direct = f.value(&x.repeat(3)) - f.value(&r.repeat(3));
        assert_relative_eq!(f.gap(&x.repeat(3), &r.repeat(3)), direct, max_relative = 1e-12);
    }

    #[test]
    fn minimizer_no_convergence_reports_best() {
        let q = make_quadratic(&[0.37], &[std::f64::consts::PI]).unwrap();
        let c = CompositeProblem::new(q, Penalty::L1 { lambda: 0.1 }).unwrap();
        match descend(&c.into(), 1e-12, 3) {
            Err(Error::NoConvergence { best, iterations, .. }) => {
                assert_eq!(best.len(), 1);
                assert_eq!(iterations, 3);
            }
            other => panic!("expected no-convergence, got {other:?}"),
        }
    }
}
