//! Run configuration: one TOML file with nested sections plus `section.key=value` overrides.

use std::path::{Path, PathBuf};

use granular_core::inference::HmcConfig;
use granular_core::{FitOptions, ModelKind, Priors};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Cnar,
    Car1,
    Car2,
    Proxy,
}

impl From<ModelChoice> for ModelKind {
    fn from(m: ModelChoice) -> Self {
        match m {
            ModelChoice::Cnar => ModelKind::Cnar,
            ModelChoice::Car1 => ModelKind::Car1,
            ModelChoice::Car2 => ModelKind::Car2,
            ModelChoice::Proxy => ModelKind::Proxy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Count,
    Fit,
    Infer,
    Ppc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stage derives its random streams from it.
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub model: ModelSection,
    pub priors: PriorSection,
    pub hmc: HmcSection,
    pub fit: FitSection,
    pub ppc: PpcSection,
    pub kernel: KernelSection,
    pub simulate: SimulateSection,
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelChoice,
    /// Sum the latent count over the whole support instead of stopping at a tail bound.
    pub exact_latent_sum: bool,
    /// Prepend a column of ones to the covariates.
    pub intercept: bool,
    /// Referent to model when a statistics file holds several; empty means "the only one".
    pub referent: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcSection {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_draws: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub init_jitter: f64,
    pub path_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub tolerance: f64,
    pub max_iter: usize,
    pub crisp_ceiling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpcSection {
    pub n_reps: usize,
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub car_tolerance: f64,
}

/// Generating parameters for `simulate`; `beta` includes the intercept when one is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub k_max: usize,
    pub beta: Vec<f64>,
    pub kappa: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub lambda: f64,
    pub offset: f64,
}

/// Inputs and outputs of `run`; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub stages: Vec<Stage>,
    pub possibility: PathBuf,
    pub covariates: PathBuf,
    pub out_dir: PathBuf,
    /// Additional models fitted and checked next to `model.kind`.
    pub compare: Vec<ModelChoice>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 0,
            model: ModelSection::default(),
            priors: PriorSection::default(),
            hmc: HmcSection::default(),
            fit: FitSection::default(),
            ppc: PpcSection::default(),
            kernel: KernelSection::default(),
            simulate: SimulateSection::default(),
            pipeline: PipelineSection::default(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { kind: ModelChoice::Cnar, exact_latent_sum: false, intercept: true, referent: String::new() }
    }
}

impl Default for PriorSection {
    fn default() -> Self {
        let p = Priors::default();
        Self {
            beta_mean: p.beta_mean,
            beta_sd: p.beta_sd,
            log_kappa_mean: p.log_kappa_mean,
            log_kappa_sd: p.log_kappa_sd,
            log_alpha_h_mean: p.log_alpha_h_mean,
            log_alpha_h_sd: p.log_alpha_h_sd,
            log_beta_h_mean: p.log_beta_h_mean,
            log_beta_h_sd: p.log_beta_h_sd,
            log_lambda_mean: p.log_lambda_mean,
            log_lambda_sd: p.log_lambda_sd,
        }
    }
}

impl Default for HmcSection {
    fn default() -> Self {
        let h = HmcConfig::default();
        Self {
            n_chains: h.n_chains,
            n_warmup: h.n_warmup,
            n_draws: h.n_draws,
            target_accept: h.target_accept,
            max_leapfrog: h.max_leapfrog,
            init_jitter: h.init_jitter,
            path_length: h.path_length,
        }
    }
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitOptions::default();
        Self { tolerance: f.tolerance, max_iter: f.max_iter, crisp_ceiling: f.crisp_ceiling }
    }
}

impl Default for PpcSection {
    fn default() -> Self {
        Self { n_reps: granular_core::ppc::DEFAULT_REPLICATES, grid: granular_core::ppc::DEFAULT_GRID }
    }
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { car_tolerance: granular_core::kernel::DEFAULT_CAR_TOLERANCE }
    }
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n: 200,
            k_max: 500,
            beta: vec![1.0, 0.5],
            kappa: 2.0,
            alpha_h: 4.0,
            beta_h: 0.1,
            lambda: 1.0,
            offset: 1.0,
        }
    }
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            stages: vec![Stage::Count, Stage::Fit, Stage::Infer, Stage::Ppc],
            possibility: "possibility.csv".into(),
            covariates: "covariates.csv".into(),
            out_dir: "out".into(),
            compare: vec![ModelChoice::Car1],
        }
    }
}

impl RunConfig {
    /// Reads `path` (defaults when `None`), applies `overrides` and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let mut cfg: RunConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(dir) = path.and_then(Path::parent) {
            cfg.pipeline.resolve_against(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hmc_config().validate()?;
        self.priors().validate()?;
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(self.fit.tolerance > 0.0) || self.fit.max_iter == 0 || !(self.fit.crisp_ceiling > 1.0) {
            return bad("fit: tolerance and max_iter must be positive and crisp_ceiling above 1");
        }
        if self.ppc.n_reps == 0 || self.ppc.grid < 2 {
            return bad("ppc: n_reps must be at least 1 and grid at least 2");
        }
        if !(self.kernel.car_tolerance >= 0.0) {
            return bad("kernel: car_tolerance must be non-negative");
        }
        let s = &self.simulate;
        if s.n == 0 || s.k_max == 0 || s.beta.is_empty() {
            return bad("simulate: n, k_max and beta must be non-empty");
        }
        if [s.kappa, s.alpha_h, s.beta_h, s.lambda, s.offset].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("simulate: kappa, alpha_h, beta_h, lambda and offset must be positive");
        }
        if s.beta.iter().any(|b| !b.is_finite()) {
            return bad("simulate: beta must be finite");
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind.into()
    }

    pub fn priors(&self) -> Priors {
        let p = &self.priors;
        Priors {
            beta_mean: p.beta_mean,
            beta_sd: p.beta_sd,
            log_kappa_mean: p.log_kappa_mean,
            log_kappa_sd: p.log_kappa_sd,
            log_alpha_h_mean: p.log_alpha_h_mean,
            log_alpha_h_sd: p.log_alpha_h_sd,
            log_beta_h_mean: p.log_beta_h_mean,
            log_beta_h_sd: p.log_beta_h_sd,
            log_lambda_mean: p.log_lambda_mean,
            log_lambda_sd: p.log_lambda_sd,
        }
    }

    pub fn hmc_config(&self) -> HmcConfig {
        let h = &self.hmc;
        HmcConfig {
            n_chains: h.n_chains,
            n_warmup: h.n_warmup,
            n_draws: h.n_draws,
            target_accept: h.target_accept,
            max_leapfrog: h.max_leapfrog,
            seed: self.seed,
            init_jitter: h.init_jitter,
            path_length: h.path_length,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions { tolerance: self.fit.tolerance, max_iter: self.fit.max_iter, crisp_ceiling: self.fit.crisp_ceiling }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration always serializes")
    }
}

impl PipelineSection {
    fn resolve_against(&mut self, dir: &Path) {
        for p in [&mut self.possibility, &mut self.covariates, &mut self.out_dir] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

/// Applies `section.key=value`; the value is parsed as TOML and falls back to a bare string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut cursor = table;
    for s in sections {
        let entry = cursor.entry(s.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{s}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
