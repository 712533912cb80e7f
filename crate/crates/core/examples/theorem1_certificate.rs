//! Linear-rate certificate for Nesterov-1983 on a smooth strongly convex
//! quadratic: threshold `K`, energy `E(K)`, and the bounds on `f − f*` and
//! `‖∇f‖²` checked against the run.

use nag_cert::lyapunov::{self, CONTRACTION_TOL};
use nag_cert::optimizers::{Method, RunConfig};
use nag_cert::problems::{self, Problem, StepSize};

fn main() -> nag_cert::Result<()> {
    for (name, diag) in [("kappa = 10", [0.5, 5.0]), ("kappa = 400", [0.5, 200.0])] {
        let p = Problem::Smooth(problems::make_quadratic(&diag, &[0.0, 0.0])?);
        let s = StepSize::fraction_of_inverse(0.9, p.lipschitz())?;
        let k = lyapunov::find_k(p.lipschitz(), p.mu(), s.value(), 2.0)?;
        let cfg = RunConfig::new(Method::Nesterov, s, 2.0, vec![1.0, 1.0], k.k + 5_000).record_every(1);
        let run = lyapunov::certify_run(&p, &cfg)?;
        let d = run.domination(CONTRACTION_TOL);
        let c = run.contraction(2_000, CONTRACTION_TOL)?;
        println!("{name}: K = {}, E(K) = {:.3e}, rate base {:.8}", k.k, run.bound.energy_at_k, run.bound.rate_base());
        println!(
            "  bounds: {} records, {} + {} violations, worst f ratio {:.3}",
            d.records_checked, d.f_violations, d.grad_violations, d.max_f_ratio
        );
        println!("  contraction: {} steps, {} violations", c.steps_checked, c.violations);
        let last = run.trace.records.last().expect("non-empty trace");
        println!("  at k = {}: f - f* = {:.3e} <= {:.3e}", last.k, last.f_err, last.bound_f.unwrap_or(f64::NAN));
    }
    Ok(())
}
