//! Mode-by-mode analysis of Nesterov-1983 on quadratics.
//!
//! On `f(x) = ½μx²` one step maps `(x_{k−1}, y_{k−1})` to `(x_k, y_k)`
//! through
//!
//! ```text
//! M(k) = [ 0              1 − μs                   ]
//!        [ −(k−1)/(k+r)   (2k+r−1)/(k+r) · (1 − μs) ]
//! ```
//!
//! whose characteristic polynomial is `λ² − bλ + c` with
//! `b = (2k+r−1)/(k+r)·(1−μs)` and `c = (k−1)/(k+r)·(1−μs)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectrum of `M(k)` for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub k: usize,
    pub mu_s: f64,
    pub r: f64,
    pub matrix: [[f64; 2]; 2],
    /// Larger-magnitude root first.
    pub roots: [Complex64; 2],
    /// `b² − 4c`.
    pub discriminant: f64,
    /// `|λ|` for a complex pair, `max |λᵢ|` otherwise.
    pub modulus: f64,
}

impl ModeSpectrum {
    /// `λ₁ + λ₂`
    pub fn trace(&self) -> f64 {
        self.matrix[1][1]
    }

    /// `λ₁λ₂`
    pub fn determinant(&self) -> f64 {
        -self.matrix[0][1] * self.matrix[1][0]
    }

    /// `|λ² − bλ + c|` at the given root.
    pub fn polynomial_residual(&self, root: usize) -> f64 {
        let l = self.roots[root];
        (l * l - self.trace() * l + self.determinant()).norm()
    }
}

fn check_mu_s(mu_s: f64) -> Result<()> {
    if !(mu_s > 0.0 && mu_s < 1.0) {
        return Err(Error::InvalidParameter(format!("mu*s = {mu_s} must lie in (0, 1)")));
    }
    Ok(())
}

/// `M(k)` for `μs`, `r`.
pub fn iteration_matrix(mu_s: f64, r: f64, k: usize) -> Result<[[f64; 2]; 2]> {
    let kf = k as f64;
    if kf + r == 0.0 {
        return Err(Error::MomentumSingularity { k, r });
    }
    let a = 1.0 - mu_s;
    Ok([
        [0.0, a],
        [-(kf - 1.0) / (kf + r), (2.0 * kf + r - 1.0) / (kf + r) * a],
    ])
}

pub fn mode_spectrum(mu: f64, s: f64, r: f64, k: usize) -> Result<ModeSpectrum> {
    let mu_s = mu * s;
    check_mu_s(mu_s)?;
    if k == 0 {
        return Err(Error::InvalidArgument("mode spectrum needs k >= 1".into()));
    }
    let matrix = iteration_matrix(mu_s, r, k)?;
    let b = matrix[1][1];
    let c = -matrix[0][1] * matrix[1][0];
    let discriminant = b * b - 4.0 * c;
    let (roots, modulus) = if discriminant < 0.0 {
        let re = 0.5 * b;
        let im = 0.5 * (-discriminant).sqrt();
        ([Complex64::new(re, im), Complex64::new(re, -im)], c.sqrt())
    } else {
        // larger root first, the other from the product to avoid cancellation
        let big = 0.5 * (b + b.signum() * discriminant.sqrt());
        let small = if big != 0.0 { c / big } else { 0.0 };
        (
            [Complex64::new(big, 0.0), Complex64::new(small, 0.0)],
            big.abs().max(small.abs()),
        )
    };
    Ok(ModeSpectrum {
        k,
        mu_s,
        r,
        matrix,
        roots,
        discriminant,
        modulus,
    })
}

/// `k → ∞` limits of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRate {
    /// `Re λ → 1 − μs`
    pub real_part_limit: f64,
    /// `|λ| → √(1 − μs)`, the per-step factor of `|x_k|`.
    pub modulus_limit: f64,
    /// `|λ|² → 1 − μs`, the per-step factor of `f(x_k) − f(x*)`.
    pub f_error_rate: f64,
    /// `b² − 4c → −4μs(1 − μs)`
    pub discriminant_limit: f64,
}

pub fn asymptotic_rate(mu: f64, s: f64) -> Result<AsymptoticRate> {
    let mu_s = mu * s;
    check_mu_s(mu_s)?;
    Ok(AsymptoticRate {
        real_part_limit: 1.0 - mu_s,
        modulus_limit: (1.0 - mu_s).sqrt(),
        f_error_rate: 1.0 - mu_s,
        discriminant_limit: -4.0 * mu_s * (1.0 - mu_s),
    })
}

/// Expected least-squares slope of `ln(f − f*)` over the indices `ks` for a
/// momentum method with parameter `r`.
///
/// The determinants multiply to `Π (j−1)/(j+r)·(1−μs) ∝ (1−μs)^k·k^{−(r+1)}`,
/// so over a finite window the slope is `ln(1−μs)` plus `−(r+1)` times the
/// least-squares slope of `ln k`; the second term vanishes as the window
/// moves out.
pub fn finite_window_slope(mu_s: f64, r: f64, ks: &[f64]) -> Result<f64> {
    check_mu_s(mu_s)?;
    if ks.len() < 2 || ks.iter().any(|&k| !(k > 0.0)) {
        return Err(Error::InvalidArgument("need at least two positive indices".into()));
    }
    let n = ks.len() as f64;
    let mx = ks.iter().sum::<f64>() / n;
    let my = ks.iter().map(|k| k.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &k in ks {
        sxx += (k - mx) * (k - mx);
        sxy += (k - mx) * (k.ln() - my);
    }
    Ok((1.0 - mu_s).ln() - (r + 1.0) * sxy / sxx)
}

/// Threshold past which the oracle reports divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e300;

/// `(x_k, y_k)` for `k = 0..=k_max`, obtained by applying `M(1), …, M(k_max)`
/// to `(x₀, x₀)`.
pub fn matrix_power_oracle(mu: f64, s: f64, r: f64, x0: f64, k_max: usize) -> Result<Vec<(f64, f64)>> {
    let mu_s = mu * s;
    check_mu_s(mu_s)?;
    let mut out = Vec::with_capacity(k_max + 1);
    let (mut x, mut y) = (x0, x0);
    out.push((x, y));
    for k in 1..=k_max {
        let m = iteration_matrix(mu_s, r, k)?;
        let nx = m[0][0] * x + m[0][1] * y;
        let ny = m[1][0] * x + m[1][1] * y;
        if !(nx.abs() <= DIVERGENCE_LIMIT && ny.abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Divergence { k });
        }
        x = nx;
        y = ny;
        out.push((x, y));
    }
    Ok(out)
}

/// Column header of [`sweep_csv`].
pub const SWEEP_HEADER: [&str; 7] = ["k", "re1", "im1", "re2", "im2", "discriminant", "modulus"];

/// Spectra at each `k` in `ks`.
pub fn sweep(mu: f64, s: f64, r: f64, ks: &[usize]) -> Result<Vec<ModeSpectrum>> {
    ks.iter().map(|&k| mode_spectrum(mu, s, r, k)).collect()
}

/// `ks` spaced logarithmically from `lo` to `hi`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (a, b) = ((lo.max(1) as f64).ln(), (hi.max(1) as f64).ln());
    let mut ks: Vec<usize> = (0..count)
        .map(|i| {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            (a + t * (b - a)).exp().round() as usize
        })
        .collect();
    ks.dedup();
    ks
}

/// Writes a sweep as CSV with [`SWEEP_HEADER`].
pub fn sweep_csv<W: std::io::Write>(out: W, rows: &[ModeSpectrum]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for m in rows {
        w.write_record([
            m.k.to_string(),
            format!("{:.16e}", m.roots[0].re),
            format!("{:.16e}", m.roots[0].im),
            format!("{:.16e}", m.roots[1].re),
            format!("{:.16e}", m.roots[1].im),
            format!("{:.16e}", m.discriminant),
            format!("{:.16e}", m.modulus),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}
