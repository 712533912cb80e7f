//! The same quadratic as `quadratic_rate` for several `r`: the fitted
//! slopes differ by the `(r+1)·d ln k/dk` term and nothing else.

use nag_cert::analysis::{self, FitFloor};
use nag_cert::optimizers::{self, Method, RunConfig};
use nag_cert::problems::{self, Problem, StepSize};
use nag_cert::spectral;

fn main() -> nag_cert::Result<()> {
    let p = problems::make_quadratic(&[0.02, 0.0005], &[0.0, 0.0])?;
    let s = StepSize::new(1.0, p.lipschitz())?;
    let ks: Vec<f64> = (20_000..=100_000).map(|k| k as f64).collect();
    let mut fits = Vec::new();
    for r in [2.0, 5.0, -1.5] {
        let cfg = RunConfig::new(Method::Nesterov, s, r, vec![1.0, 1.0], 100_000).record_every(1);
        let trace = optimizers::run(&Problem::Smooth(p.clone()), &cfg)?;
        let fit = analysis::fit_linear_rate(&trace.f_err_series(), 20_000.0, FitFloor::NONE)?;
        let predicted = spectral::finite_window_slope(p.mu() * s.value(), r, &ks)?;
        println!("r = {r:>4}: slope {:.6e}, predicted {predicted:.6e}", fit.slope);
        fits.push(fit);
    }
    println!("max pairwise relative deviation {:.4}", analysis::compare_rates(&fits)?);
    Ok(())
}
