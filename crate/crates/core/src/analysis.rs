//! Empirical linear rates: least-squares fits of `ln(value)` against the
//! iteration index (or time).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of admitted points for a fit.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `ln` of the per-step contraction factor.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First abscissa admitted.
    pub burn_in: f64,
    pub n_points: usize,
}

impl RateFit {
    /// `exp(slope)`
    pub fn factor(&self) -> f64 {
        self.slope.exp()
    }
}

/// Values at or below the floor are excluded from a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum FitFloor {
    /// Multiple of the first value in the trace.
    Relative(f64),
    Absolute(f64),
}

impl Default for FitFloor {
    /// `10²·eps` times the initial value.
    fn default() -> Self {
        FitFloor::Relative(1e2 * f64::EPSILON)
    }
}

impl FitFloor {
    /// For traces whose values keep full relative precision all the way
    /// down (e.g. a quadratic minimised at the origin).
    pub const NONE: FitFloor = FitFloor::Absolute(f64::MIN_POSITIVE);

    fn resolve(&self, initial: f64) -> f64 {
        match *self {
            FitFloor::Relative(c) => c * initial.abs(),
            FitFloor::Absolute(v) => v,
        }
    }
}

/// OLS of `ln(value)` on `x` over points with `x ≥ burn_in` and
/// `value > floor`.
pub fn fit_linear_rate(points: &[(f64, f64)], burn_in: f64, floor: FitFloor) -> Result<RateFit> {
    let initial = points.first().map(|p| p.1).unwrap_or(0.0);
    let floor = floor.resolve(initial);
    let adm: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, v)| *x >= burn_in && *v > floor && v.is_finite())
        .map(|&(x, v)| (x, v.ln()))
        .collect();
    if adm.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            admitted: adm.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let n = adm.len() as f64;
    let mx = adm.iter().map(|p| p.0).sum::<f64>() / n;
    let my = adm.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &adm {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            admitted: 1,
            required: MIN_FIT_POINTS,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // spread at rounding level means the values are constant
    let noise = n * (4.0 * f64::EPSILON * my.abs().max(1.0)).powi(2);
    let r_squared = if syy <= noise {
        1.0
    } else {
        let ss_res: f64 = adm
            .iter()
            .map(|&(x, y)| {
                let e = y - (intercept + slope * x);
                e * e
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        burn_in: adm[0].0,
        n_points: adm.len(),
    })
}

/// `max_{i,j} |slopeᵢ − slopeⱼ| / max |slope|`.
pub fn compare_rates(fits: &[RateFit]) -> Result<f64> {
    if fits.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least two fits, got {}", fits.len())));
    }
    let hi = fits.iter().map(|f| f.slope).fold(f64::NEG_INFINITY, f64::max);
    let lo = fits.iter().map(|f| f.slope).fold(f64::INFINITY, f64::min);
    let scale = fits.iter().map(|f| f.slope.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((hi - lo) / scale)
}

/// Limiting oscillation period `2π / arg λ` of a mode with `μs ∈ (0, 1)`,
/// where `tan arg λ → √(μs/(1−μs))`.
pub fn oscillation_period(mu_s: f64) -> f64 {
    2.0 * std::f64::consts::PI / (mu_s / (1.0 - mu_s)).sqrt().atan()
}

/// Shortest window spanning ten oscillation periods, or `10³` when `μs`
/// is not in `(0, 1)`.
pub fn min_fit_window(mu_s: f64) -> f64 {
    if mu_s > 0.0 && mu_s < 1.0 {
        10.0 * oscillation_period(mu_s)
    } else {
        1e3
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geometric(a: f64, q: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|k| (k as f64, a * q.powi(k as i32))).collect()
    }

    #[test]
    fn exact_geometric() {
        let f = fit_linear_rate(&geometric(3.0, 0.999, 5000), 0.0, FitFloor::default()).unwrap();
        assert!((f.slope - 0.999f64.ln()).abs() < 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, max_relative = 1e-12);
        assert_eq!(f.n_points, 5000);
    }

    #[test]
    fn constant_input() {
        let pts: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 2.5)).collect();
        let f = fit_linear_rate(&pts, 0.0, FitFloor::default()).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn floor_and_burn_in_exclude_points() {
        let pts = geometric(1.0, 0.5, 200);
        let f = fit_linear_rate(&pts, 10.0, FitFloor::default()).unwrap();
        assert_eq!(f.burn_in, 10.0);
        // 0.5^k > 2.2e-14 up to k = 45
        assert_eq!(f.n_points, 36);
        let g = fit_linear_rate(&pts, 10.0, FitFloor::NONE).unwrap();
        assert_eq!(g.n_points, 190);
    }

    #[test]
    fn too_few_points() {
        let pts = geometric(1.0, 0.5, 8);
        assert!(matches!(
            fit_linear_rate(&pts, 0.0, FitFloor::default()),
            Err(Error::InsufficientData { admitted: 8, required: 10 })
        ));
    }

    #[test]
    fn compare_examples() {
        let mk = |slope| RateFit { slope, intercept: 0.0, r_squared: 1.0, burn_in: 0.0, n_points: 10 };
        assert_eq!(compare_rates(&[mk(-1e-3), mk(-1e-3)]).unwrap(), 0.0);
        assert_relative_eq!(compare_rates(&[mk(-1.0e-3), mk(-1.02e-3)]).unwrap(), 0.02 / 1.02, max_relative = 1e-12);
        assert!(compare_rates(&[]).is_err());
        assert!(compare_rates(&[mk(1.0)]).is_err());
    }

    #[test]
    fn period_of_slow_mode() {
        let p = oscillation_period(1e-3);
        assert!((p - 198.6).abs() < 0.5, "{p}");
        assert_eq!(min_fit_window(0.0), 1e3);
    }
}
