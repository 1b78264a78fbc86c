use alloc::vec::Vec;

use libm::{exp, log, log1p};

use crate::error::{Error, Result};
use crate::kernel::LatentCountModel;
use crate::special::{ln_gamma, log_sum_exp};

/// Negative-binomial log-pmf in the mean–dispersion form, `Var = μ + μ²/κ`.
///
/// `y` may be any non-negative real; non-integers give the usual gamma-function extension.
pub fn negbin_log_pmf(y: f64, mu: f64, kappa: f64) -> f64 {
    let log_total = log(kappa + mu);
    ln_gamma(y + kappa) - ln_gamma(kappa) - ln_gamma(y + 1.0) - kappa * log1p(mu / kappa)
        + if y > 0.0 { y * (log(mu) - log_total) } else { 0.0 }
}

/// Negative-binomial pmf restricted to `{0, …, k}` and renormalized.
pub fn truncated_count_pmf(mu: f64, kappa: f64, k: usize) -> Result<LatentCountModel> {
    let logs = log_pmf_prefix(mu, kappa, k);
    let total = log_sum_exp(&logs);
    if !(total > log(1e-300)) {
        return Err(Error::TruncationIncompatible { k, mass: exp(total) });
    }
    Ok(LatentCountModel::from_normalized(logs.iter().map(|l| exp(l - total)).collect()))
}

/// `ln f(y)` for `y = 0..=k` by the ratio recursion `f(y)/f(y−1) = (y−1+κ)/y · μ/(κ+μ)`.
pub(crate) fn log_pmf_prefix(mu: f64, kappa: f64, k: usize) -> Vec<f64> {
    let log_ratio = log(mu) - log(kappa + mu);
    let mut out = Vec::with_capacity(k + 1);
    let mut current = -kappa * log1p(mu / kappa);
    out.push(current);
    for y in 1..=k {
        current += log((y as f64 - 1.0 + kappa) / y as f64) + log_ratio;
        out.push(current);
    }
    out
}
