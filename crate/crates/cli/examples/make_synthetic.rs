//! Regenerates the bundled synthetic dataset:
//!
//! ```text
//! cargo run -p granular-cli --example make_synthetic -- data/synthetic
//! ```
//!
//! Four referents (`g1`..`g4`) in 60 samples. Each referent's true count is negative binomial
//! with a log-linear mean in one covariate `x` and a per-sample offset. Every read of a
//! referent has degree 1 for it; some reads also map to a second referent with a smaller
//! degree, and a few map to both with degree 1.

use std::path::PathBuf;

use granular_cli::io::{write_covariates, write_possibility, Covariates, PossibilityTable};
use granular_core::{stream_rng, PossibilityAssignment};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

const N_SAMPLES: usize = 60;
const SEED: u64 = 20240611;
/// (intercept, slope on x, dispersion κ) per referent.
const REFERENTS: [(f64, f64, f64); 4] = [(3.3, 0.5, 2.0), (3.6, -0.3, 5.0), (3.0, 0.0, 3.0), (2.5, 0.8, 4.0)];
const MULTIMAP_RATE: f64 = 0.3;
const TIE_RATE: f64 = 0.05;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/synthetic".into()));
    let mut rng = stream_rng(SEED, 0);
    let names: Vec<String> = (1..=REFERENTS.len()).map(|g| format!("g{g}")).collect();
    let mut samples = Vec::new();
    let mut cov_rows = Vec::new();
    for i in 0..N_SAMPLES {
        let id = format!("s{:03}", i + 1);
        let x: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
        let offset = (0.2 * Normal::<f64>::new(0.0, 1.0).unwrap().sample(&mut rng)).exp();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (g, &(b0, b1, kappa)) in REFERENTS.iter().enumerate() {
            let mu = offset * (b0 + b1 * x).exp();
            let rate = Gamma::new(kappa, mu / kappa).unwrap().sample(&mut rng);
            let y = if rate > 0.0 { Poisson::new(rate).unwrap().sample(&mut rng) as usize } else { 0 };
            for _ in 0..y {
                let mut row = vec![0.0; REFERENTS.len()];
                row[g] = 1.0;
                let u: f64 = rng.random();
                if u < MULTIMAP_RATE + TIE_RATE {
                    let other = (g + rng.random_range(1..REFERENTS.len())) % REFERENTS.len();
                    row[other] = if u < TIE_RATE { 1.0 } else { rng.random_range(1..=9) as f64 / 10.0 };
                }
                rows.push(row);
            }
        }
        samples.push((id.clone(), PossibilityAssignment::from_rows(&rows).unwrap()));
        cov_rows.push((id, offset, vec![x]));
    }
    write_possibility(&out.join("possibility.csv"), &PossibilityTable { referents: names, samples }).unwrap();
    write_covariates(&out.join("covariates.csv"), &Covariates { names: vec!["x".into()], rows: cov_rows }).unwrap();
    println!("wrote {}", out.display());
}
