use std::path::Path;

use granular_core::possibility::granular_count_fast;
use rayon::prelude::*;

use crate::error::Result;
use crate::io::{read_possibility, write_counts, CountRow};

/// Granular count of every referent in every sample.
pub fn count(possibility: &Path, out: &Path) -> Result<Vec<CountRow>> {
    let table = read_possibility(possibility)?;
    let per_sample: Vec<Vec<CountRow>> = table
        .samples
        .par_iter()
        .map(|(id, assign)| {
            table
                .referents
                .iter()
                .enumerate()
                .map(|(r, name)| {
                    Ok(CountRow { sample_id: id.clone(), referent: name.clone(), xi: granular_count_fast(assign, r)? })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<CountRow> = per_sample.into_iter().flatten().collect();
    let unnormalized = table.samples.iter().filter(|(_, a)| !a.is_normalized()).count();
    if unnormalized > 0 {
        log::warn!("stage=count unnormalized_samples={unnormalized}");
    }
    write_counts(out, &rows)?;
    log::info!(
        "stage=count samples={} referents={} counts={} out={}",
        table.samples.len(),
        table.referents.len(),
        rows.len(),
        out.display()
    );
    Ok(rows)
}
