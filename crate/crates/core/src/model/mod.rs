//! The hierarchical fuzzy-count model and its baselines.
//!
//! For sample `i` the latent count is `Y_i ~ NegBin(μ_i, κ)` truncated to `{0, …, K_i}` with
//! `μ_i = u_i·exp(z_i·β)`. The report precision is `H_i ~ Gamma(α_h, β_h)` (rate form) and the
//! scaled location is `C_i | H_i, Y_i ~ Beta(h_i·ȳ, h_i·(1 − ȳ))`, observed as `c_i = K_i·C_i`.
//!
//! Four variants share that skeleton (see [`ModelKind`]). Parameters travel in two forms:
//! [`ModelParams`] on the natural scale and a flat unconstrained vector (logs of the positive
//! parameters) whose layout is given by [`ModelKind::param_names`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{invalid, Error, Result};

mod likelihood;
mod negbin;
mod simulate;

pub use likelihood::{
    car1_observed_loglik, car2_observed_loglik, cnar_observed_loglik, cond_location_log_density, continuity_corrected,
    grad_log_posterior, location_bounds, proxy_observed_loglik, LikelihoodOptions, Posterior,
};
pub use negbin::{negbin_log_pmf, truncated_count_pmf};
pub use simulate::{simulate, simulate_with, SimulatedData};

/// Which observation model to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Latent negative-binomial count marginalized under the Beta report law.
    Cnar,
    /// Beta report law centered on the scaled mean, without a latent count.
    Car1,
    /// As [`ModelKind::Car1`] with both Beta shapes multiplied by a dispersion `λ`.
    Car2,
    /// Negative-binomial regression on centroid-defuzzified counts.
    Proxy,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Cnar, ModelKind::Car1, ModelKind::Car2, ModelKind::Proxy];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnar => "cnar",
            ModelKind::Car1 => "car1",
            ModelKind::Car2 => "car2",
            ModelKind::Proxy => "proxy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn has_kappa(self) -> bool {
        matches!(self, ModelKind::Cnar | ModelKind::Proxy)
    }

    pub fn has_precision_model(self) -> bool {
        !matches!(self, ModelKind::Proxy)
    }

    pub fn has_lambda(self) -> bool {
        matches!(self, ModelKind::Car2)
    }

    /// Length of the unconstrained parameter vector for `p` covariates.
    pub fn dim(self, p: usize) -> usize {
        p + usize::from(self.has_kappa()) + 2 * usize::from(self.has_precision_model()) + usize::from(self.has_lambda())
    }

    /// Parameter names in vector order: `beta_0..beta_{p-1}`, then `kappa`, `alpha_h`,
    /// `beta_h`, `lambda` where present.
    pub fn param_names(self, p: usize) -> Vec<String> {
        let mut names: Vec<String> = (0..p).map(|j| format!("beta_{j}")).collect();
        if self.has_kappa() {
            names.push("kappa".into());
        }
        if self.has_precision_model() {
            names.push("alpha_h".into());
            names.push("beta_h".into());
        }
        if self.has_lambda() {
            names.push("lambda".into());
        }
        names
    }
}

/// Design matrix, offsets and per-sample truncation levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    n: usize,
    p: usize,
    covariates: Vec<f64>,
    offsets: Vec<f64>,
    k_max: Vec<usize>,
}

impl RegressionSpec {
    /// `covariates` is row major `n × p`.
    pub fn new(n: usize, p: usize, covariates: Vec<f64>, offsets: Vec<f64>, k_max: Vec<usize>) -> Result<Self> {
        if covariates.len() != n * p {
            return Err(Error::LengthMismatch { expected: n * p, got: covariates.len() });
        }
        if offsets.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: offsets.len() });
        }
        if k_max.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: k_max.len() });
        }
        if let Some(i) = offsets.iter().position(|&u| !(u > 0.0 && u.is_finite())) {
            return Err(invalid(format!("offset of sample {i} must be positive, got {}", offsets[i])));
        }
        if let Some(i) = k_max.iter().position(|&k| k == 0) {
            return Err(invalid(format!("truncation level of sample {i} must be at least 1")));
        }
        if covariates.iter().any(|z| !z.is_finite()) {
            return Err(invalid("covariates must be finite"));
        }
        Ok(Self { n, p, covariates, offsets, k_max })
    }

    /// Intercept-only design with unit offsets.
    pub fn intercept_only(k_max: Vec<usize>) -> Result<Self> {
        let n = k_max.len();
        Self::new(n, 1, alloc::vec![1.0; n], alloc::vec![1.0; n], k_max)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn k_max(&self, i: usize) -> usize {
        self.k_max[i]
    }

    pub fn k_max_all(&self) -> &[usize] {
        &self.k_max
    }

    /// Linear predictor `ln u_i + z_i·β`.
    pub fn log_mean(&self, i: usize, beta: &[f64]) -> f64 {
        log(self.offsets[i]) + self.row(i).iter().zip(beta).map(|(z, b)| z * b).sum::<f64>()
    }
}

/// Largest linear predictor accepted before `exp` overflows.
const MAX_LOG_MEAN: f64 = 700.0;

/// `μ_i = u_i·exp(z_i·β)`.
pub fn mean_response(spec: &RegressionSpec, params: &ModelParams, i: usize) -> Result<f64> {
    if i >= spec.n {
        return Err(Error::IndexOutOfRange { index: i, len: spec.n });
    }
    if params.beta.len() != spec.p {
        return Err(Error::LengthMismatch { expected: spec.p, got: params.beta.len() });
    }
    let eta = spec.log_mean(i, &params.beta);
    if !(eta <= MAX_LOG_MEAN) {
        return Err(Error::PredictorOverflow { index: i, eta });
    }
    Ok(exp(eta))
}

/// Model parameters on their natural scale. Fields a model does not use are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub kappa: Option<f64>,
    pub alpha_h: Option<f64>,
    pub beta_h: Option<f64>,
    pub lambda: Option<f64>,
}

impl ModelParams {
    pub fn cnar(beta: Vec<f64>, kappa: f64, alpha_h: f64, beta_h: f64) -> Self {
        Self { beta, kappa: Some(kappa), alpha_h: Some(alpha_h), beta_h: Some(beta_h), lambda: None }
    }

    pub fn car1(beta: Vec<f64>, alpha_h: f64, beta_h: f64) -> Self {
        Self { beta, kappa: None, alpha_h: Some(alpha_h), beta_h: Some(beta_h), lambda: None }
    }

    pub fn car2(beta: Vec<f64>, alpha_h: f64, beta_h: f64, lambda: f64) -> Self {
        Self { lambda: Some(lambda), ..Self::car1(beta, alpha_h, beta_h) }
    }

    pub fn proxy(beta: Vec<f64>, kappa: f64) -> Self {
        Self { beta, kappa: Some(kappa), alpha_h: None, beta_h: None, lambda: None }
    }

    /// Checks that exactly the fields `kind` uses are present and positive.
    pub fn validate(&self, kind: ModelKind, p: usize) -> Result<()> {
        if self.beta.len() != p {
            return Err(Error::LengthMismatch { expected: p, got: self.beta.len() });
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(invalid("regression coefficients must be finite"));
        }
        let check = |name: &str, value: Option<f64>, wanted: bool| -> Result<()> {
            match (value, wanted) {
                (Some(v), true) if v > 0.0 && v.is_finite() => Ok(()),
                (Some(v), true) => Err(invalid(format!("{name} must be positive, got {v}"))),
                (None, true) => Err(invalid(format!("{name} is required by the {} model", kind.name()))),
                (_, false) => Ok(()),
            }
        };
        check("kappa", self.kappa, kind.has_kappa())?;
        check("alpha_h", self.alpha_h, kind.has_precision_model())?;
        check("beta_h", self.beta_h, kind.has_precision_model())?;
        check("lambda", self.lambda, kind.has_lambda())?;
        Ok(())
    }

    /// Flat vector on the natural scale in [`ModelKind::param_names`] order.
    pub fn to_constrained(&self, kind: ModelKind) -> Vec<f64> {
        let mut v = self.beta.clone();
        if kind.has_kappa() {
            v.push(self.kappa.unwrap_or(f64::NAN));
        }
        if kind.has_precision_model() {
            v.push(self.alpha_h.unwrap_or(f64::NAN));
            v.push(self.beta_h.unwrap_or(f64::NAN));
        }
        if kind.has_lambda() {
            v.push(self.lambda.unwrap_or(f64::NAN));
        }
        v
    }

    /// Unconstrained vector: `β` followed by logs of the positive parameters.
    pub fn to_unconstrained(&self, kind: ModelKind) -> Vec<f64> {
        let p = self.beta.len();
        let mut v = self.to_constrained(kind);
        for x in &mut v[p..] {
            *x = log(*x);
        }
        v
    }

    pub fn from_constrained(kind: ModelKind, p: usize, values: &[f64]) -> Result<Self> {
        if values.len() != kind.dim(p) {
            return Err(Error::LengthMismatch { expected: kind.dim(p), got: values.len() });
        }
        let mut rest = values[p..].iter().copied();
        let mut params = Self { beta: values[..p].to_vec(), kappa: None, alpha_h: None, beta_h: None, lambda: None };
        if kind.has_kappa() {
            params.kappa = rest.next();
        }
        if kind.has_precision_model() {
            params.alpha_h = rest.next();
            params.beta_h = rest.next();
        }
        if kind.has_lambda() {
            params.lambda = rest.next();
        }
        params.validate(kind, p)?;
        Ok(params)
    }

    pub fn from_unconstrained(kind: ModelKind, p: usize, theta: &[f64]) -> Result<Self> {
        let mut v = theta.to_vec();
        if v.len() >= p {
            for x in &mut v[p..] {
                *x = exp(*x);
            }
        }
        Self::from_constrained(kind, p, &v)
    }
}

/// One observed fuzzy count summarized by its Beta-type statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyObservation {
    pub c: f64,
    pub h: f64,
    pub k: usize,
}

impl FuzzyObservation {
    pub fn new(c: f64, h: f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("truncation level K must be at least 1"));
        }
        if !(c.is_finite() && (0.0..=k as f64).contains(&c)) {
            return Err(invalid(format!("location c = {c} outside [0, {k}]")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("precision h = {h} must be positive")));
        }
        Ok(Self { c, h, k })
    }

    /// Scaled location `c / K`.
    pub fn scaled(&self) -> f64 {
        self.c / self.k as f64
    }
}

/// Normal priors on the unconstrained scale: `β_j ~ N(0, beta_sd²)` and each log-parameter
/// `~ N(mean, sd²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub log_kappa_mean: f64,
    pub log_kappa_sd: f64,
    pub log_alpha_h_mean: f64,
    pub log_alpha_h_sd: f64,
    pub log_beta_h_mean: f64,
    pub log_beta_h_sd: f64,
    pub log_lambda_mean: f64,
    pub log_lambda_sd: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            beta_mean: 0.0,
            beta_sd: 5.0,
            log_kappa_mean: 0.0,
            log_kappa_sd: 1.5,
            log_alpha_h_mean: 0.0,
            log_alpha_h_sd: 1.5,
            log_beta_h_mean: 0.0,
            log_beta_h_sd: 1.5,
            log_lambda_mean: 0.0,
            log_lambda_sd: 1.0,
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let sds = [self.beta_sd, self.log_kappa_sd, self.log_alpha_h_sd, self.log_beta_h_sd, self.log_lambda_sd];
        if sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("prior standard deviations must be positive"));
        }
        Ok(())
    }

    /// `(mean, sd)` for each coordinate of the unconstrained vector.
    pub fn moments(&self, kind: ModelKind, p: usize) -> Vec<(f64, f64)> {
        let mut m = alloc::vec![(self.beta_mean, self.beta_sd); p];
        if kind.has_kappa() {
            m.push((self.log_kappa_mean, self.log_kappa_sd));
        }
        if kind.has_precision_model() {
            m.push((self.log_alpha_h_mean, self.log_alpha_h_sd));
            m.push((self.log_beta_h_mean, self.log_beta_h_sd));
        }
        if kind.has_lambda() {
            m.push((self.log_lambda_mean, self.log_lambda_sd));
        }
        m
    }

    /// Prior means on the unconstrained scale.
    pub fn means(&self, kind: ModelKind, p: usize) -> Vec<f64> {
        self.moments(kind, p).into_iter().map(|(m, _)| m).collect()
    }
}
