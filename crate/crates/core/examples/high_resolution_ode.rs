//! RK4 on the gradient-correction ODE for `f = ½x²` with `s = 0.04`,
//! checking the continuous-time bound past `T = 4/(μ√s)` and the order of
//! the integrator.

use nag_cert::ode::{self, OdeConfig, DECAY_TOL};
use nag_cert::problems;

fn main() -> nag_cert::Result<()> {
    let p = problems::make_quadratic(&[0.5], &[0.0])?;
    let s = 0.04;
    let cfg = OdeConfig::new(&p, s, vec![1.0], 200.0).sample_every(100);
    let trace = ode::integrate(&p, &cfg)?;
    for smp in trace.samples.iter().step_by(10) {
        match smp.theorem3_bound {
            Some(b) => println!("t = {:>7.2}: f = {:.3e} <= {:.3e}", smp.t, smp.f_err, b),
            None => println!("t = {:>7.2}: f = {:.3e}", smp.t, smp.f_err),
        }
    }
    let rep = ode::theorem3_check(&trace, p.mu(), s, DECAY_TOL)?;
    println!(
        "T = {}, {} samples checked, max ratio {:.3}, passed {}",
        rep.threshold_time, rep.samples_checked, rep.max_ratio, rep.passed
    );
    let order = ode::richardson_ratio(&p, &OdeConfig::new(&p, s, vec![1.0], 10.0))?;
    println!("Richardson ratio {order:.2} (16 for a fourth-order method)");
    Ok(())
}
