use std::path::Path;

use granular_core::fuzzy::fit_beta;
use granular_core::FuzzyObservation;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{read_counts, write_stats, FitQuality, StatRow};

/// Fits a Beta-type fuzzy count to every granular count; unusable rows are dropped and logged.
pub fn fit(counts: &Path, out: &Path, cfg: &RunConfig) -> Result<Vec<(StatRow, FitQuality)>> {
    let rows = read_counts(counts)?;
    let opts = cfg.fit_options();
    let fitted: Vec<Option<(StatRow, FitQuality)>> = rows
        .par_iter()
        .map(|row| match fit_beta(&row.xi, &opts) {
            Ok(f) => {
                let p = f.params;
                let obs = FuzzyObservation::new(p.c(), p.h(), p.k_max())?;
                let stat = StatRow { sample_id: row.sample_id.clone(), referent: Some(row.referent.clone()), obs };
                Ok(Some((stat, FitQuality { sse: f.sse, converged: f.converged, crisp: f.crisp })))
            }
            Err(e) if e.is_validation() => {
                log::warn!("stage=fit dropped sample={} referent={} reason=\"{e}\"", row.sample_id, row.referent);
                Ok(None)
            }
            Err(e) => Err(CliError::from(e)),
        })
        .collect::<Result<_>>()?;
    let kept: Vec<(StatRow, FitQuality)> = fitted.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(CliError::Validation(format!("{}: no usable granular counts", counts.display())));
    }
    let unconverged = kept.iter().filter(|(_, q)| !q.converged).count();
    if unconverged > 0 {
        log::warn!("stage=fit unconverged={unconverged}");
    }
    write_stats(out, &kept)?;
    log::info!(
        "stage=fit rows={} kept={} dropped={} out={}",
        rows.len(),
        kept.len(),
        rows.len() - kept.len(),
        out.display()
    );
    Ok(kept)
}
