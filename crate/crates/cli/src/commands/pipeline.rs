use std::path::PathBuf;
use std::time::Instant;

use granular_core::ModelKind;

use super::{count, fit, infer, ppc};
use crate::config::{RunConfig, Stage};
use crate::error::Result;

/// Runs the configured stages in order, reading and writing the fixed file names
/// `counts.csv`, `stats.csv`, `draws_<model>.csv` and `ppc.csv` under `pipeline.out_dir`.
/// Skipped stages leave their outputs to be supplied from an earlier run.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PathBuf> {
    let p = &cfg.pipeline;
    let out = p.out_dir.clone();
    let counts = out.join("counts.csv");
    let stats = out.join("stats.csv");
    let mut kinds: Vec<ModelKind> = vec![cfg.kind()];
    for &m in &p.compare {
        let k = ModelKind::from(m);
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    let start = Instant::now();
    let wants = |s: Stage| p.stages.contains(&s);
    if wants(Stage::Count) {
        count(&p.possibility, &counts)?;
    }
    if wants(Stage::Fit) {
        fit(&counts, &stats, cfg)?;
    }
    let draws: Vec<PathBuf> = kinds.iter().map(|k| out.join(format!("draws_{}.csv", k.name()))).collect();
    if wants(Stage::Infer) {
        for &k in &kinds {
            infer(&stats, &p.covariates, &out, cfg, k)?;
        }
    }
    if wants(Stage::Ppc) {
        let raw = counts.exists().then_some(counts.as_path());
        ppc(&stats, &p.covariates, &draws, raw, &out, cfg)?;
    }
    log::info!("stage=run seconds={:.1} out={}", start.elapsed().as_secs_f64(), out.display());
    Ok(out)
}
