use std::path::{Path, PathBuf};

use granular_core::model::simulate_with;
use granular_core::{stream_rng, ModelKind, ModelParams, RegressionSpec};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{beta_name, model_description};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{write_covariates, write_json, writer, Covariates};

/// Generating parameters and seed, written next to the simulated observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRecord {
    pub model: &'static str,
    pub description: &'static str,
    pub seed: u64,
    pub n: usize,
    pub k_max: usize,
    pub offset: f64,
    pub columns: Vec<String>,
    pub parameters: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub observations: PathBuf,
    pub covariates: PathBuf,
    pub record: PathBuf,
}

fn truth(cfg: &RunConfig, kind: ModelKind) -> ModelParams {
    let s = &cfg.simulate;
    let beta = s.beta.clone();
    match kind {
        ModelKind::Cnar => ModelParams::cnar(beta, s.kappa, s.alpha_h, s.beta_h),
        ModelKind::Car1 => ModelParams::car1(beta, s.alpha_h, s.beta_h),
        ModelKind::Car2 => ModelParams::car2(beta, s.alpha_h, s.beta_h, s.lambda),
        ModelKind::Proxy => ModelParams::proxy(beta, s.kappa),
    }
}

/// Draws a dataset from `model.kind` at the `[simulate]` parameters.
///
/// Non-intercept covariates are standard normal (random stream 1); observations use stream 0.
/// Writes `observations.csv`, `covariates.csv` and `simulation.json` into `out_dir`.
pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateOutput> {
    let s = &cfg.simulate;
    let kind = cfg.kind();
    let p = s.beta.len();
    let mut columns = Vec::with_capacity(p);
    if cfg.model.intercept {
        columns.push("intercept".to_string());
    }
    let free = p - columns.len();
    columns.extend((1..=free).map(|j| format!("x{j}")));
    let mut rng = stream_rng(cfg.seed, 1);
    let mut z = Vec::with_capacity(s.n * p);
    let mut cov_rows = Vec::with_capacity(s.n);
    for i in 0..s.n {
        let x: Vec<f64> = (0..free).map(|_| rng.sample(StandardNormal)).collect();
        if cfg.model.intercept {
            z.push(1.0);
        }
        z.extend_from_slice(&x);
        cov_rows.push((format!("s{:04}", i + 1), s.offset, x));
    }
    let spec = RegressionSpec::new(s.n, p, z, vec![s.offset; s.n], vec![s.k_max; s.n])?;
    let params = truth(cfg, kind);
    let data = simulate_with(&spec, &params, kind, &mut stream_rng(cfg.seed, 0))?;

    let out = SimulateOutput {
        observations: out_dir.join("observations.csv"),
        covariates: out_dir.join("covariates.csv"),
        record: out_dir.join("simulation.json"),
    };
    let mut w = writer(&out.observations)?;
    let csv_err = |source| CliError::Csv { path: out.observations.clone(), source };
    let mut header = vec!["sample_id", "c", "h", "K"];
    if data.latent.is_some() {
        header.push("y_latent");
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, obs) in data.observations.iter().enumerate() {
        let mut rec = vec![cov_rows[i].0.clone(), obs.c.to_string(), obs.h.to_string(), obs.k.to_string()];
        if let Some(latent) = &data.latent {
            rec.push(latent[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(&out.observations, e))?;
    let names: Vec<String> = free_names(&columns).collect();
    write_covariates(&out.covariates, &Covariates { names, rows: cov_rows })?;

    let mut parameters: Vec<(String, f64)> = columns.iter().map(|c| beta_name(c)).zip(s.beta.iter().copied()).collect();
    let constrained = params.to_constrained(kind);
    parameters.extend(kind.param_names(p).into_iter().zip(constrained).skip(p));
    let record = SimulationRecord {
        model: kind.name(),
        description: model_description(kind),
        seed: cfg.seed,
        n: s.n,
        k_max: s.k_max,
        offset: s.offset,
        columns,
        parameters,
    };
    write_json(&out.record, &record)?;
    log::info!("stage=simulate model={} samples={} out={}", kind.name(), s.n, out_dir.display());
    Ok(out)
}

fn free_names(columns: &[String]) -> impl Iterator<Item = String> + '_ {
    columns.iter().filter(|c| *c != "intercept").cloned()
}
