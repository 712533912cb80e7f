//! Eigenvalues of the per-mode iteration matrix as `k` grows, written as
//! CSV to stdout. The modulus squared approaches `1 − μs`.

use nag_cert::spectral;

fn main() -> nag_cert::Result<()> {
    let (mu, s, r) = (0.1, 1.0, 2.0);
    let limit = spectral::asymptotic_rate(mu, s)?;
    eprintln!(
        "limits: |lambda|^2 -> {}, discriminant -> {}",
        limit.f_error_rate, limit.discriminant_limit
    );
    let rows = spectral::sweep(mu, s, r, &spectral::log_spaced(1, 100_000, 30))?;
    spectral::sweep_csv(std::io::stdout().lock(), &rows)?;
    Ok(())
}
