//! Samples the three inequalities behind the composite certificate on the
//! deblurring problem and reports the smallest scaled residual of each.

use nag_cert::linalg::Lcg64;
use nag_cert::lyapunov::{self, INEQUALITY_TOL};
use nag_cert::problems::{self, DeblurSpec};

fn main() -> nag_cert::Result<()> {
    for lambda in [0.0, 0.1, 1.0] {
        let spec = DeblurSpec::new(vec![1.0 / 3.0; 3], problems::blocky_signal(64), 7, lambda, 0.5);
        let p = problems::make_lasso_deblur(&spec)?;
        let s = 0.9 / p.lipschitz();
        let mut rng = Lcg64::new(42);
        let mut worst = [f64::INFINITY; 3];
        let mut holds = true;
        for _ in 0..1_000 {
            let x = rng.vector(p.dim(), -2.0, 2.0);
            let y = rng.vector(p.dim(), -2.0, 2.0);
            let res = [
                lyapunov::check_subgradient_lower_bound(&p, &y, s)?,
                lyapunov::check_fundamental_proximal(&p, &x, &y, s)?,
                lyapunov::check_strong_smooth_inequality(p.smooth(), &x, &y, s)?,
            ];
            for (w, r) in worst.iter_mut().zip(&res) {
                *w = w.min(r.residual / r.scale);
                holds &= r.holds(INEQUALITY_TOL);
            }
        }
        println!(
            "lambda = {lambda}: min scaled residuals {:.2e} / {:.2e} / {:.2e}, all hold: {holds}",
            worst[0], worst[1], worst[2]
        );
        let xs = p.minimizer()?;
        let zeros = xs.iter().filter(|v| **v == 0.0).count();
        println!("  {zeros} of {} minimizer entries are zero", xs.len());
    }
    Ok(())
}
