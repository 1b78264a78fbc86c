use std::path::{Path, PathBuf};
use std::time::Instant;

use granular_core::inference::{run_chain, ParamSummary, PosteriorDraws, RHAT_THRESHOLD};
use granular_core::model::{LikelihoodOptions, Posterior};
use granular_core::{ModelKind, ModelParams};
use rayon::prelude::*;
use serde::Serialize;

use super::{load_design, model_description, parameter_names};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{write_draws, write_json, writer};

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ParamRecord {
    name: String,
    mean: f64,
    sd: f64,
    q05: f64,
    q95: f64,
    rhat: Option<f64>,
    ess_bulk: f64,
    flagged: bool,
}

impl From<&ParamSummary> for ParamRecord {
    fn from(s: &ParamSummary) -> Self {
        Self {
            name: s.name.clone(),
            mean: s.mean,
            sd: s.sd,
            q05: s.q05,
            q95: s.q95,
            rhat: s.rhat,
            ess_bulk: s.ess_bulk,
            flagged: s.flagged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ChainRecord {
    chain: usize,
    step_size: f64,
    accept_rate: f64,
    mean_leapfrog: f64,
    divergences: usize,
    warmup_divergences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DiagnosticsRecord {
    model: &'static str,
    description: &'static str,
    seed: u64,
    n_samples: usize,
    columns: Vec<String>,
    n_chains: usize,
    n_warmup: usize,
    n_draws: usize,
    exact_latent_sum: bool,
    divergences: usize,
    max_rhat: Option<f64>,
    chains: Vec<ChainRecord>,
    parameters: Vec<ParamRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferOutput {
    pub kind: ModelKind,
    pub draws: PosteriorDraws,
    pub draws_path: PathBuf,
    pub summary_path: PathBuf,
    pub diagnostics_path: PathBuf,
}

/// Runs the HMC sampler for `kind` and writes `draws_<kind>.csv`, `summary_<kind>.csv` and
/// `diagnostics_<kind>.json` into `out_dir`. Chains run in parallel and are merged in order.
pub fn infer(stats: &Path, covariates: &Path, out_dir: &Path, cfg: &RunConfig, kind: ModelKind) -> Result<InferOutput> {
    let design = load_design(stats, covariates, cfg)?;
    let p = design.columns.len();
    let opts = LikelihoodOptions { exact_latent_sum: cfg.model.exact_latent_sum };
    let post = Posterior::new(kind, design.spec.clone(), design.data.clone(), cfg.priors(), opts)?;
    let hmc = cfg.hmc_config();
    let center = cfg.priors().means(kind, p);
    log::info!(
        "stage=infer model={} samples={} params={} chains={} warmup={} draws={}",
        kind.name(),
        design.sample_ids.len(),
        kind.dim(p),
        hmc.n_chains,
        hmc.n_warmup,
        hmc.n_draws
    );
    let start = Instant::now();
    let chains = (0..hmc.n_chains)
        .into_par_iter()
        .map(|c| run_chain(&post, &hmc, c, &center))
        .collect::<granular_core::Result<Vec<_>>>()?;
    let names = parameter_names(kind, &design.columns);
    let draws = PosteriorDraws::from_chains(names, &chains, |q| {
        ModelParams::from_unconstrained(kind, p, q).expect("draw has the model dimension").to_constrained(kind)
    })?;

    let tag = kind.name();
    let out = InferOutput {
        kind,
        draws_path: out_dir.join(format!("draws_{tag}.csv")),
        summary_path: out_dir.join(format!("summary_{tag}.csv")),
        diagnostics_path: out_dir.join(format!("diagnostics_{tag}.json")),
        draws,
    };
    write_draws(&out.draws_path, &out.draws)?;
    write_summary(&out.summary_path, &out.draws.diagnostics)?;
    let record = DiagnosticsRecord {
        model: tag,
        description: model_description(kind),
        seed: hmc.seed,
        n_samples: design.sample_ids.len(),
        columns: design.columns.clone(),
        n_chains: hmc.n_chains,
        n_warmup: hmc.n_warmup,
        n_draws: hmc.n_draws,
        exact_latent_sum: opts.exact_latent_sum,
        divergences: out.draws.divergences(),
        max_rhat: out.draws.max_rhat(),
        chains: chains
            .iter()
            .map(|c| ChainRecord {
                chain: c.chain,
                step_size: c.step_size,
                accept_rate: granular_core::stats::mean(&c.accept_stat),
                mean_leapfrog: c.n_leapfrog.iter().sum::<usize>() as f64 / c.n_leapfrog.len() as f64,
                divergences: c.divergent.iter().filter(|&&d| d).count(),
                warmup_divergences: c.warmup_divergences,
            })
            .collect(),
        parameters: out.draws.diagnostics.iter().map(ParamRecord::from).collect(),
    };
    write_json(&out.diagnostics_path, &record)?;

    for d in out.draws.diagnostics.iter().filter(|d| d.flagged) {
        log::warn!("stage=infer model={tag} param={} rhat={:?} threshold={RHAT_THRESHOLD}", d.name, d.rhat);
    }
    if record.divergences > 0 {
        log::warn!("stage=infer model={tag} divergences={}", record.divergences);
    }
    log::info!(
        "stage=infer model={tag} max_rhat={:.4} divergences={} seconds={:.1} out={}",
        record.max_rhat.unwrap_or(f64::NAN),
        record.divergences,
        start.elapsed().as_secs_f64(),
        out_dir.display()
    );
    Ok(out)
}

fn write_summary(path: &Path, rows: &[ParamSummary]) -> Result<()> {
    let mut w = writer(path)?;
    let err = |source| CliError::Csv { path: path.to_path_buf(), source };
    w.write_record(["param", "mean", "sd", "q05", "q95", "rhat", "ess_bulk", "flagged"]).map_err(err)?;
    for s in rows {
        w.write_record([
            s.name.clone(),
            s.mean.to_string(),
            s.sd.to_string(),
            s.q05.to_string(),
            s.q95.to_string(),
            s.rhat.map_or(String::new(), |r| r.to_string()),
            s.ess_bulk.to_string(),
            s.flagged.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
