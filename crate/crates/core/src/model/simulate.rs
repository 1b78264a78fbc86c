use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use super::{mean_response, FuzzyObservation, ModelKind, ModelParams, RegressionSpec};
use crate::error::{invalid, Result};
use crate::fuzzy::DEFAULT_CRISP_CEILING;
use crate::model::{continuity_corrected, location_bounds, truncated_count_pmf};

/// Synthetic fuzzy observations plus the latent counts when the model has them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub observations: Vec<FuzzyObservation>,
    pub latent: Option<Vec<usize>>,
}

fn draw_truncated_count<R: Rng + ?Sized>(mu: f64, kappa: f64, k: usize, rng: &mut R) -> Result<usize> {
    let pmf = truncated_count_pmf(mu, kappa, k)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (y, p) in pmf.probabilities().iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(y);
        }
    }
    Ok(pmf.probabilities().iter().rposition(|&p| p > 0.0).unwrap_or(0))
}

fn draw_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    let dist = Beta::new(a, b).map_err(|e| invalid(alloc::format!("Beta({a}, {b}): {e}")))?;
    let x: f64 = dist.sample(rng);
    Ok(if x.is_nan() {
        if a >= b {
            1.0
        } else {
            0.0
        }
    } else {
        x.clamp(0.0, 1.0)
    })
}

/// Draws one synthetic dataset from `kind` at `params`.
///
/// For every sample: the latent count (latent-count and proxy models), the precision
/// `H ~ Gamma(α_h, β_h)` and the scaled location from its Beta law; returns
/// `(c, h) = (K·C, H)`. The proxy model reports the count itself as a crisp observation.
pub fn simulate_with<R: Rng + ?Sized>(
    spec: &RegressionSpec,
    params: &ModelParams,
    kind: ModelKind,
    rng: &mut R,
) -> Result<SimulatedData> {
    params.validate(kind, spec.p())?;
    let precision = match (params.alpha_h, params.beta_h) {
        (Some(a), Some(b)) if kind.has_precision_model() => {
            Some(Gamma::new(a, 1.0 / b).map_err(|e| invalid(alloc::format!("Gamma({a}, {b}): {e}")))?)
        }
        _ => None,
    };
    let mut observations = Vec::with_capacity(spec.n());
    let mut latent = Vec::with_capacity(spec.n());
    for i in 0..spec.n() {
        let k = spec.k_max(i);
        let kf = k as f64;
        let mu = mean_response(spec, params, i)?;
        let obs = match kind {
            ModelKind::Cnar | ModelKind::Proxy => {
                let kappa = params.kappa.expect("validated");
                let y = draw_truncated_count(mu, kappa, k, rng)?;
                latent.push(y);
                if kind == ModelKind::Proxy {
                    FuzzyObservation { c: y as f64, h: DEFAULT_CRISP_CEILING, k }
                } else {
                    let h = positive(precision.as_ref().expect("validated").sample(rng));
                    let y_bar = continuity_corrected(y, k);
                    let c = kf * draw_beta(h * y_bar, h * (1.0 - y_bar), rng)?;
                    FuzzyObservation { c, h, k }
                }
            }
            ModelKind::Car1 | ModelKind::Car2 => {
                let h = positive(precision.as_ref().expect("validated").sample(rng));
                let (_, hi) = location_bounds(k);
                let m = ((mu + 0.5) / (kf + 1.0)).min(hi);
                let s = h * params.lambda.unwrap_or(1.0);
                let c = kf * draw_beta(s * m, s * (1.0 - m), rng)?;
                FuzzyObservation { c, h, k }
            }
        };
        observations.push(obs);
    }
    let latent = kind.has_kappa().then_some(latent);
    Ok(SimulatedData { observations, latent })
}

/// [`simulate_with`] on stream 0 of the generator seeded by `seed`.
pub fn simulate(spec: &RegressionSpec, params: &ModelParams, kind: ModelKind, seed: u64) -> Result<SimulatedData> {
    simulate_with(spec, params, kind, &mut crate::stream_rng(seed, 0))
}

fn positive(h: f64) -> f64 {
    h.max(f64::MIN_POSITIVE)
}
