//! One function per subcommand. Each reads its inputs, writes its outputs and returns what it
//! wrote so callers (and tests) can inspect the results without re-reading files.

mod audit;
mod count;
mod fit;
mod infer;
mod pipeline;
mod ppc;
mod simulate;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use granular_core::{FuzzyObservation, ModelKind, RegressionSpec};

pub use audit::{kernel_audit, AuditReport, KernelFile};
pub use count::count;
pub use fit::fit;
pub use infer::{infer, InferOutput};
pub use pipeline::run_pipeline;
pub use ppc::{ppc, PpcOutput};
pub use simulate::{simulate, SimulateOutput};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{read_covariates, read_stats, select_referent};

/// Short description stored with every output that names a model.
pub fn model_description(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Cnar => {
            "cnar: negative-binomial latent count marginalized under a Beta report law (non-ignorable coarsening)"
        }
        ModelKind::Car1 => {
            "car1: CAR-like stand-in, Beta report law centered on (mu + 0.5)/(K + 1) with no latent count"
        }
        ModelKind::Car2 => "car2: CAR-like stand-in, car1 with both Beta shapes scaled by a global dispersion lambda",
        ModelKind::Proxy => "proxy: negative-binomial regression on rounded centroid-defuzzified counts",
    }
}

/// Column name of the regression coefficient for design column `name`.
pub fn beta_name(name: &str) -> String {
    format!("beta[{name}]")
}

/// Parameter names of `kind` for the given design columns.
pub fn parameter_names(kind: ModelKind, design: &[String]) -> Vec<String> {
    let mut names: Vec<String> = design.iter().map(|n| beta_name(n)).collect();
    names.extend(kind.param_names(design.len()).into_iter().skip(design.len()));
    names
}

/// Recovers the model and design columns from a draws header.
pub fn kind_from_names(names: &[String]) -> Result<(ModelKind, Vec<String>)> {
    let design: Vec<String> = names
        .iter()
        .map_while(|n| n.strip_prefix("beta[").and_then(|s| s.strip_suffix(']')).map(str::to_string))
        .collect();
    ModelKind::ALL
        .into_iter()
        .find(|&k| parameter_names(k, &design) == names)
        .map(|k| (k, design))
        .ok_or_else(|| CliError::Validation(format!("draws columns [{}] match no model", names.join(", "))))
}

/// Observations aligned with their covariate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub sample_ids: Vec<String>,
    /// Design column names, `intercept` first when configured.
    pub columns: Vec<String>,
    pub spec: RegressionSpec,
    pub data: Vec<FuzzyObservation>,
}

/// Joins statistics (one referent) with covariates by sample id, in statistics order.
///
/// Statistics without covariates are an error; covariate rows without statistics are dropped
/// with a log line, since `fit` may have dropped those samples.
pub fn load_design(stats: &Path, covariates: &Path, cfg: &RunConfig) -> Result<Design> {
    let rows = select_referent(read_stats(stats)?, &cfg.model.referent)?;
    let cov = read_covariates(covariates)?;
    let index: HashMap<&str, usize> = cov.rows.iter().enumerate().map(|(i, r)| (r.0.as_str(), i)).collect();
    let mut seen = HashSet::new();
    for r in &rows {
        if !seen.insert(r.sample_id.as_str()) {
            return Err(CliError::Validation(format!("duplicate sample id `{}` in statistics", r.sample_id)));
        }
    }
    let orphans: Vec<&str> = rows.iter().map(|r| r.sample_id.as_str()).filter(|id| !index.contains_key(id)).collect();
    if !orphans.is_empty() {
        return Err(CliError::Validation(format!("samples without covariates: {}", orphans.join(", "))));
    }
    let unused: Vec<&str> = cov.rows.iter().map(|r| r.0.as_str()).filter(|id| !seen.contains(id)).collect();
    if !unused.is_empty() {
        log::warn!("stage=design dropped={} reason=\"no statistics\" samples={}", unused.len(), unused.join(","));
    }
    let mut columns = Vec::new();
    if cfg.model.intercept {
        columns.push("intercept".to_string());
    }
    columns.extend(cov.names.iter().cloned());
    if columns.is_empty() {
        return Err(CliError::Validation("the design has no columns: enable the intercept or add covariates".into()));
    }
    let mut z = Vec::with_capacity(rows.len() * columns.len());
    let mut offsets = Vec::with_capacity(rows.len());
    for r in &rows {
        let (_, u, values) = &cov.rows[index[r.sample_id.as_str()]];
        if cfg.model.intercept {
            z.push(1.0);
        }
        z.extend_from_slice(values);
        offsets.push(*u);
    }
    let k_max = rows.iter().map(|r| r.obs.k).collect();
    let spec = RegressionSpec::new(rows.len(), columns.len(), z, offsets, k_max)?;
    Ok(Design {
        sample_ids: rows.iter().map(|r| r.sample_id.clone()).collect(),
        columns,
        spec,
        data: rows.iter().map(|r| r.obs).collect(),
    })
}
