//! Nesterov-1983 on `f = 0.02·x₁² + 0.0005·x₂²` with `s = 1`, `r = 2`.
//!
//! Prints the fitted log-slope of `f(x_k) − f*` over `k ∈ [2·10⁴, 10⁵]`
//! next to the asymptotic prediction `ln(1 − μs)` and the finite-window
//! prediction that accounts for the `k^{−(r+1)}` envelope.
//!
//! ```text
//! cargo run --release --example quadratic_rate
//! ```

use nag_cert::analysis::{self, FitFloor};
use nag_cert::optimizers::{self, Method, RunConfig};
use nag_cert::problems::{self, Problem, StepSize};
use nag_cert::spectral;

fn main() -> nag_cert::Result<()> {
    let p = problems::make_quadratic(&[0.02, 0.0005], &[0.0, 0.0])?;
    let s = StepSize::new(1.0, p.lipschitz())?;
    let r = 2.0;
    let cfg = RunConfig::new(Method::Nesterov, s, r, vec![1.0, 1.0], 100_000).record_every(1);
    let trace = optimizers::run(&Problem::Smooth(p.clone()), &cfg)?;

    for rec in trace.records.iter().step_by(10_000) {
        println!("k = {:>6}  f - f* = {:.3e}", rec.k, rec.f_err);
    }

    let burn_in = 20_000.0;
    let fit = analysis::fit_linear_rate(&trace.f_err_series(), burn_in, FitFloor::NONE)?;
    let ks: Vec<f64> = (20_000..=100_000).map(|k| k as f64).collect();
    let mu_s = p.mu() * s.value();
    println!("fitted slope          {:.6e} (r² = {:.6})", fit.slope, fit.r_squared);
    println!("ln(1 - mu s)          {:.6e}", (1.0 - mu_s).ln());
    println!("finite-window target  {:.6e}", spectral::finite_window_slope(mu_s, r, &ks)?);
    Ok(())
}
