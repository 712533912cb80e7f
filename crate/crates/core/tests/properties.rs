//! Invariants of the problems, proximal maps and methods under random inputs.

use proptest::prelude::*;

use nag_cert::analysis::{self, FitFloor};
use nag_cert::linalg;
use nag_cert::lyapunov;
use nag_cert::optimizers::{self, Method, OptimizerState, RunConfig};
use nag_cert::problems::{self, DeblurSpec, Penalty, Problem, SmoothProblem, StepSize};
use nag_cert::spectral;

fn deblur(lambda: f64) -> problems::CompositeProblem {
    let spec = DeblurSpec::new(vec![0.25, 0.5, 0.25], problems::blocky_signal(16), 3, lambda, 0.5);
    problems::make_lasso_deblur(&spec).unwrap()
}

fn logsumexp() -> SmoothProblem {
    let rows = vec![vec![1.0, -0.5, 0.2], vec![0.3, 0.8, -1.0], vec![-0.7, 0.1, 0.4], vec![0.0, 1.0, 1.0]];
    problems::make_logsumexp_ridge(rows, vec![0.1, -0.2, 0.3, 0.0], 0.2).unwrap()
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

/// `f(y) ≥ f(x) + ⟨∇f(x), y − x⟩ + (μ/2)‖y − x‖²` and the matching upper bound with `L`.
fn sandwich(p: &SmoothProblem, x: &[f64], y: &[f64]) -> (f64, f64) {
    let f = p.function();
    let d = linalg::sub(y, x);
    let lin = f.gap(y, x) - linalg::dot(&p.gradient(x), &d);
    let n2 = linalg::norm_sq(&d);
    let slack = 1e-10 * (1.0 + f.value(x).abs() + f.value(y).abs());
    (lin - 0.5 * p.mu() * n2 + slack, 0.5 * p.lipschitz() * n2 - lin + slack)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strong_convexity_and_smoothness_deblur(x in vec_of(16), y in vec_of(16)) {
        let p = deblur(0.0);
        let (lo, hi) = sandwich(p.smooth(), &x, &y);
        prop_assert!(lo >= 0.0 && hi >= 0.0, "lo {lo} hi {hi}");
    }

    #[test]
    fn strong_convexity_and_smoothness_logsumexp(x in vec_of(3), y in vec_of(3)) {
        let (lo, hi) = sandwich(&logsumexp(), &x, &y);
        prop_assert!(lo >= 0.0 && hi >= 0.0, "lo {lo} hi {hi}");
    }

    #[test]
    fn gradient_matches_central_differences(x in vec_of(3), i in 0usize..3) {
        let p = logsumexp();
        let h = 1e-5;
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += h;
        b[i] -= h;
        let fd = (p.value(&a) - p.value(&b)) / (2.0 * h);
        prop_assert!((fd - p.gradient(&x)[i]).abs() < 1e-7 * (1.0 + fd.abs()));
    }

    #[test]
    fn hessian_vec_matches_gradient_differences(x in vec_of(3), v in vec_of(3)) {
        let p = logsumexp();
        let h = 1e-5;
        let g1 = p.gradient(&linalg::axpy(&x, h, &v));
        let g0 = p.gradient(&linalg::axpy(&x, -h, &v));
        let hv = p.hessian_vec(&x, &v).unwrap();
        for i in 0..3 {
            let fd = (g1[i] - g0[i]) / (2.0 * h);
            prop_assert!((fd - hv[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn prox_is_firmly_nonexpansive(a in vec_of(8), b in vec_of(8), lambda in 0.0f64..2.0, s in 0.01f64..2.0) {
        let g = Penalty::L1 { lambda };
        let (pa, pb) = (g.prox(&a, s), g.prox(&b, s));
        let dp = linalg::sub(&pa, &pb);
        let d = linalg::sub(&a, &b);
        prop_assert!(linalg::norm_sq(&dp) <= linalg::dot(&dp, &d) + 1e-12);
    }

    #[test]
    fn prox_optimality(z in vec_of(8), lambda in 0.0f64..2.0, s in 0.01f64..2.0) {
        // (z − p)/s ∈ λ ∂‖p‖₁
        let p = Penalty::L1 { lambda }.prox(&z, s);
        for (zi, pi) in z.iter().zip(&p) {
            let u = (zi - pi) / s;
            if *pi != 0.0 {
                prop_assert!((u - lambda * pi.signum()).abs() < 1e-12 * (1.0 + lambda));
            } else {
                prop_assert!(u.abs() <= lambda * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn phase_form_matches_two_sequence_form(
        diag in prop::collection::vec(0.05f64..2.0, 1..4),
        r in prop::sample::select(vec![-1.5, -0.5, 0.0, 1.0, 2.0, 3.0, 5.0]),
        frac in 0.1f64..0.95,
    ) {
        let shift: Vec<f64> = (0..diag.len()).map(|i| 1.0 - 0.3 * i as f64).collect();
        let p = Problem::Smooth(problems::make_quadratic(&diag, &shift).unwrap());
        let s = StepSize::fraction_of_inverse(frac, p.lipschitz()).unwrap();
        let x0 = vec![0.0; diag.len()];
        let run = |m| optimizers::iterates(&p, &RunConfig::new(m, s, r, x0.clone(), 300)).unwrap();
        let (a, b) = (run(Method::Nesterov), run(Method::NesterovPhase));
        for (u, v) in a.iter().zip(&b) {
            let scale = 1.0 + linalg::norm(v);
            prop_assert!(linalg::norm(&linalg::sub(u, v)) <= 1e-8 * scale);
        }
    }

    #[test]
    fn phase_step_satisfies_reformulated_identity(
        k in 1usize..200,
        r in 0.0f64..6.0,
        x in vec_of(16),
        xp in vec_of(16),
    ) {
        let p = deblur(0.0);
        let s = StepSize::fraction_of_inverse(0.5, p.lipschitz()).unwrap();
        let mut st = OptimizerState::starting_at(k, x.clone(), r, s);
        st.x_prev = xp;
        st.v = Some(st.velocity());
        let next = optimizers::nesterov_phase_step(p.smooth(), &st).unwrap();
        let res = optimizers::reformulated_identity_residual(p.smooth(), &st, &next).unwrap();
        prop_assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn energy_is_nonnegative(
        k in 1usize..500,
        r in 0.0f64..6.0,
        x in vec_of(16),
        xp in vec_of(16),
    ) {
        let p = deblur(0.1);
        let s = StepSize::fraction_of_inverse(0.9, p.lipschitz()).unwrap();
        let mut st = OptimizerState::starting_at(k, x, r, s);
        st.x_prev = xp;
        let e = lyapunov::discrete_lyapunov(&Problem::Composite(p.clone()), &st, p.mu()).unwrap();
        prop_assert!(e.total >= 0.0 && e.potential >= -1e-12 && e.kinetic >= 0.0);
    }

    #[test]
    fn spectrum_matches_trace_and_determinant(
        mu_s in 0.001f64..0.999,
        r in -0.9f64..10.0,
        k in 1usize..100_000,
    ) {
        let m = spectral::mode_spectrum(mu_s, 1.0, r, k).unwrap();
        let sum = m.roots[0] + m.roots[1];
        let prod = m.roots[0] * m.roots[1];
        prop_assert!((sum.re - m.trace()).abs() < 1e-12 && sum.im.abs() < 1e-12);
        prop_assert!((prod.re - m.determinant()).abs() < 1e-12 && prod.im.abs() < 1e-12);
        prop_assert!(m.roots[0].norm() >= m.roots[1].norm() - 1e-15);
    }

    #[test]
    fn fit_recovers_geometric_rate(rate in 0.5f64..0.9999, scale in 1e-3f64..1e3) {
        let pts: Vec<(f64, f64)> = (0..200).map(|k| (k as f64, scale * rate.powi(k))).collect();
        let fit = analysis::fit_linear_rate(&pts, 0.0, FitFloor::NONE).unwrap();
        prop_assert!((fit.factor() - rate).abs() < 1e-9);
        prop_assert!(fit.r_squared > 1.0 - 1e-9);
    }
}

#[test]
fn fista_without_penalty_is_nesterov() {
    let p = deblur(0.3).with_penalty(Penalty::Zero).unwrap();
    let s = StepSize::fraction_of_inverse(0.9, p.lipschitz()).unwrap();
    let cfg = |m| RunConfig::new(m, s, 2.0, vec![0.0; p.dim()], 500);
    let a = optimizers::iterates(&Problem::Composite(p.clone()), &cfg(Method::Fista)).unwrap();
    let b = optimizers::iterates(&Problem::Smooth(p.smooth().clone()), &cfg(Method::Nesterov)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn integer_negative_r_needs_shifted_start() {
    let p = Problem::Smooth(problems::make_quadratic(&[1.0], &[0.0]).unwrap());
    let s = StepSize::fraction_of_inverse(0.5, p.lipschitz()).unwrap();
    let cfg = RunConfig::new(Method::Nesterov, s, -2.0, vec![1.0], 50);
    assert!(optimizers::run(&p, &cfg).is_err());
    let trace = optimizers::run(&p, &cfg.with_shifted_start()).unwrap();
    assert_eq!(trace.records[0].k, 3);
    assert!(trace.records.last().unwrap().f_err < trace.records[0].f_err);
}
