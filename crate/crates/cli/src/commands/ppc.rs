use std::collections::HashMap;
use std::path::{Path, PathBuf};

use granular_core::ppc::{
    energy_from_profiles, membership_profile, raw_membership_profile, replicate, summarize_replicates, PpcSummary,
    Replicate,
};
use granular_core::stats::mean;
use granular_core::ModelKind;
use rayon::prelude::*;
use serde::Serialize;

use super::{kind_from_names, load_design, model_description, Design};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{read_counts, read_draws, write_json, writer};

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ObservedRecord {
    scaled_mean: f64,
    iqr80: f64,
    u_obs: f64,
    u_obs_raw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ModelRecord {
    model: &'static str,
    description: &'static str,
    draws: PathBuf,
    p_scaled_mean: f64,
    p_iqr80: f64,
    mean_u_rep: f64,
    mean_u_cross: f64,
    mean_cross_gap: f64,
    mean_cross_gap_raw: Option<f64>,
    mean_rep_iqr80: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PpcRecord {
    seed: u64,
    n_reps: usize,
    grid: usize,
    n_samples: usize,
    observed: ObservedRecord,
    models: Vec<ModelRecord>,
}

/// Per-model results of a posterior predictive check.
#[derive(Debug, Clone, PartialEq)]
pub struct PpcOutput {
    pub models: Vec<(ModelKind, PpcSummary)>,
    /// `u_cross` against the raw granular counts, per model and replicate, when counts were given.
    pub raw_cross: Option<Vec<Vec<f64>>>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// Raw membership profiles of the observed samples, checked against the fitted `K`.
fn raw_profiles(counts: &Path, design: &Design, referent: &str, grid: usize) -> Result<Vec<Vec<f64>>> {
    let rows = read_counts(counts)?;
    let mut referents: Vec<&str> = rows.iter().map(|r| r.referent.as_str()).collect();
    referents.sort_unstable();
    referents.dedup();
    let wanted = match (referent, referents.as_slice()) {
        ("", [only]) => *only,
        ("", _) => return Err(CliError::Validation("counts hold several referents; set model.referent".into())),
        (r, _) => r,
    };
    let by_id: HashMap<&str, _> =
        rows.iter().filter(|r| r.referent == wanted).map(|r| (r.sample_id.as_str(), &r.xi)).collect();
    design
        .sample_ids
        .iter()
        .zip(&design.data)
        .map(|(id, obs)| {
            let xi = by_id
                .get(id.as_str())
                .ok_or_else(|| CliError::Validation(format!("sample `{id}` has no granular count")))?;
            if xi.k_max() != obs.k {
                return Err(CliError::Validation(format!(
                    "sample `{id}`: granular count has K = {} but statistics have K = {}",
                    xi.k_max(),
                    obs.k
                )));
            }
            Ok(raw_membership_profile(xi, grid))
        })
        .collect()
}

/// Replicates the observed statistics from each set of draws and compares them.
///
/// The model of each draws file is read from its header. Every model uses random streams
/// `(seed, r)` for replicate `r`. Writes `ppc.csv` (one line per model and replicate) and
/// `ppc.json` into `out_dir`.
pub fn ppc(
    stats: &Path,
    covariates: &Path,
    draws: &[PathBuf],
    counts: Option<&Path>,
    out_dir: &Path,
    cfg: &RunConfig,
) -> Result<PpcOutput> {
    if draws.is_empty() {
        return Err(CliError::Validation("ppc needs at least one draws file".into()));
    }
    let design = load_design(stats, covariates, cfg)?;
    let (n_reps, grid) = (cfg.ppc.n_reps, cfg.ppc.grid);
    let raw_obs = counts.map(|c| raw_profiles(c, &design, &cfg.model.referent, grid)).transpose()?;

    let mut models = Vec::new();
    let mut raw_cross = raw_obs.as_ref().map(|_| Vec::new());
    let mut records = Vec::new();
    for path in draws {
        let posterior = read_draws(path)?;
        let (kind, columns) = kind_from_names(&posterior.names)?;
        if columns != design.columns {
            return Err(CliError::Validation(format!(
                "{}: coefficients [{}] do not match the design [{}]",
                path.display(),
                columns.join(", "),
                design.columns.join(", ")
            )));
        }
        let reps = replicate(&posterior, &design.spec, kind, n_reps, cfg.seed)?;
        let summary = summarize_parallel(&design, &reps, grid)?;
        let gap_raw = match (&raw_obs, raw_cross.as_mut()) {
            (Some(obs), Some(acc)) => {
                let cross: Vec<f64> = reps
                    .par_iter()
                    .map(|r| {
                        let profiles: Vec<Vec<f64>> =
                            r.data.observations.iter().map(|o| membership_profile(o, grid)).collect();
                        energy_from_profiles(obs, &profiles).map(|e| e.u_cross)
                    })
                    .collect::<granular_core::Result<_>>()?;
                let u_obs = energy_from_profiles(obs, obs)?.u_obs;
                let gap = mean(&cross.iter().map(|u| (u - u_obs).abs()).collect::<Vec<_>>());
                acc.push(cross);
                Some(gap)
            }
            _ => None,
        };
        records.push(ModelRecord {
            model: kind.name(),
            description: model_description(kind),
            draws: path.clone(),
            p_scaled_mean: summary.p_mean,
            p_iqr80: summary.p_iqr80,
            mean_u_rep: mean(&summary.u_rep),
            mean_u_cross: mean(&summary.u_cross),
            mean_cross_gap: summary.mean_cross_gap(),
            mean_cross_gap_raw: gap_raw,
            mean_rep_iqr80: mean(&summary.rep_iqr80),
        });
        log::info!(
            "stage=ppc model={} reps={n_reps} p_mean={:.3} p_iqr80={:.3} cross_gap={:.5}",
            kind.name(),
            summary.p_mean,
            summary.p_iqr80,
            summary.mean_cross_gap()
        );
        models.push((kind, summary));
    }

    let first = &models[0].1;
    let u_obs_raw = raw_obs.as_ref().map(|obs| energy_from_profiles(obs, obs).map(|e| e.u_obs)).transpose()?;
    let record = PpcRecord {
        seed: cfg.seed,
        n_reps,
        grid,
        n_samples: design.sample_ids.len(),
        observed: ObservedRecord {
            scaled_mean: first.observed_mean,
            iqr80: first.observed_iqr80,
            u_obs: first.u_obs,
            u_obs_raw,
        },
        models: records,
    };
    let out = PpcOutput { models, raw_cross, csv_path: out_dir.join("ppc.csv"), json_path: out_dir.join("ppc.json") };
    write_table(&out)?;
    write_json(&out.json_path, &record)?;
    Ok(out)
}

/// [`summarize_replicates`] with the replicates split across workers; the split does not
/// change any number because each replicate's statistics are computed independently.
fn summarize_parallel(design: &Design, reps: &[Replicate], grid: usize) -> Result<PpcSummary> {
    let chunk = reps.len().div_ceil(rayon::current_num_threads().max(1)).max(1);
    let parts = reps
        .par_chunks(chunk)
        .map(|part| summarize_replicates(&design.data, part, grid))
        .collect::<granular_core::Result<Vec<_>>>()?;
    let mut merged = parts[0].clone();
    for part in &parts[1..] {
        merged.rep_mean.extend_from_slice(&part.rep_mean);
        merged.rep_iqr80.extend_from_slice(&part.rep_iqr80);
        merged.u_rep.extend_from_slice(&part.u_rep);
        merged.u_cross.extend_from_slice(&part.u_cross);
        merged.draw_index.extend_from_slice(&part.draw_index);
    }
    merged.p_mean = granular_core::ppc::tail_probability(&merged.rep_mean, merged.observed_mean);
    merged.p_iqr80 = granular_core::ppc::tail_probability(&merged.rep_iqr80, merged.observed_iqr80);
    Ok(merged)
}

fn write_table(out: &PpcOutput) -> Result<()> {
    let path = &out.csv_path;
    let mut w = writer(path)?;
    let err = |source| CliError::Csv { path: path.clone(), source };
    let mut header = vec!["model", "rep_id", "draw_index", "u_rep", "u_cross", "scaled_mean", "iqr80"];
    if out.raw_cross.is_some() {
        header.push("u_cross_raw");
    }
    w.write_record(&header).map_err(err)?;
    for (m, (kind, s)) in out.models.iter().enumerate() {
        for r in 0..s.n_reps() {
            let mut rec = vec![
                kind.name().to_string(),
                r.to_string(),
                s.draw_index[r].to_string(),
                s.u_rep[r].to_string(),
                s.u_cross[r].to_string(),
                s.rep_mean[r].to_string(),
                s.rep_iqr80[r].to_string(),
            ];
            if let Some(raw) = &out.raw_cross {
                rec.push(raw[m][r].to_string());
            }
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
