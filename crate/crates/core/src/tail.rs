//! Hill-type estimates of the error-density tail `f(u) ≈ b c u^{c−1}` from
//! ranked frontier residuals.

use crate::error::{invalid, Error, Result};
use crate::frontier::ResidualSet;

/// Default fraction of residuals used below the threshold.
pub const DEFAULT_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailParams {
    pub b_hat: f64,
    pub c_hat: f64,
    pub r: usize,
    pub n1: usize,
}

/// Smallest integer strictly greater than `fraction·n1`, capped at `n1 − 1`.
pub fn select_r(n1: usize, fraction: f64) -> Result<usize> {
    if n1 < 2 {
        return Err(invalid(format!("need at least 2 positive residuals, got {n1}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid("threshold fraction must lie in (0, 1)"));
    }
    let r = (fraction * n1 as f64).floor() as usize + 1;
    Ok(r.min(n1 - 1))
}

/// Tail estimates from residuals sorted ascending.
///
/// `ĉ = {log ε₍ᵣ₊₁₎ − r⁻¹ Σᵢ≤ᵣ log ε₍ᵢ₎}⁻¹`, `b̂ = (r/N₁) ε₍ᵣ₊₁₎^{−ĉ}`.
pub fn hill_from_sorted(sorted: &[f64], r: usize) -> Result<TailParams> {
    let n1 = sorted.len();
    if r == 0 || r + 1 > n1 {
        return Err(invalid(format!("threshold r = {r} needs 1 <= r <= N1 - 1 = {}", n1 as i64 - 1)));
    }
    if sorted.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(invalid("residuals must be positive and finite"));
    }
    let mean_log = sorted[..r].iter().map(|e| e.ln()).sum::<f64>() / r as f64;
    let top = sorted[r];
    let bracket = top.ln() - mean_log;
    if !(bracket > 0.0) {
        return Err(Error::DegenerateSpacings { bracket });
    }
    let c_hat = 1.0 / bracket;
    let b_hat = (r as f64 / n1 as f64) * top.powf(-c_hat);
    Ok(TailParams { b_hat, c_hat, r, n1 })
}

pub fn hill_estimate(res: &ResidualSet, r: usize) -> Result<TailParams> {
    hill_from_sorted(&res.residuals, r)
}

/// [`hill_estimate`] with `r` chosen by [`select_r`].
pub fn estimate_tail(res: &ResidualSet, fraction: f64) -> Result<TailParams> {
    hill_estimate(res, select_r(res.n1(), fraction)?)
}
