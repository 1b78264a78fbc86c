//! Posterior predictive checks.
//!
//! Replicated datasets are simulated from systematically thinned posterior draws and compared
//! with the observed data through two scalar summaries of the scaled locations `c̄ = c/K` (mean
//! and the 80% inter-quantile range `q₀.₉ − q₀.₁`, type-7 quantiles) and through energy-like
//! components built on the RMS distance between membership functions on a common unit grid.

use alloc::vec::Vec;

use libm::sqrt;

use crate::error::{invalid, Error, Result};
use crate::fuzzy::{unit_membership, BetaFuzzy};
use crate::inference::PosteriorDraws;
use crate::model::{simulate_with, FuzzyObservation, ModelKind, ModelParams, RegressionSpec, SimulatedData};
use crate::possibility::MembershipVector;
use crate::stats::{mean, pairwise_sum, quantile_sorted};
use crate::stream_rng;

pub const DEFAULT_GRID: usize = 101;
pub const DEFAULT_REPLICATES: usize = 200;

/// One replicated dataset and the posterior draw (row of [`PosteriorDraws::values`]) it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub draw_index: usize,
    pub data: SimulatedData,
}

/// Row indices `⌊r·N/n_reps⌋` for `r = 0..n_reps`.
pub fn thin_indices(available: usize, n_reps: usize) -> Result<Vec<usize>> {
    if n_reps == 0 {
        return Err(invalid("at least one replicate is required"));
    }
    if n_reps > available {
        return Err(Error::NotEnoughDraws { requested: n_reps, available });
    }
    Ok((0..n_reps).map(|r| r * available / n_reps).collect())
}

/// Simulates `n_reps` datasets, replicate `r` using random stream `(seed, r)`.
pub fn replicate(
    draws: &PosteriorDraws,
    spec: &RegressionSpec,
    kind: ModelKind,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<Replicate>> {
    if draws.dim() != kind.dim(spec.p()) {
        return Err(Error::LengthMismatch { expected: kind.dim(spec.p()), got: draws.dim() });
    }
    thin_indices(draws.n_rows(), n_reps)?
        .into_iter()
        .enumerate()
        .map(|(r, row)| {
            let params = ModelParams::from_constrained(kind, spec.p(), &draws.values[row])?;
            let data = simulate_with(spec, &params, kind, &mut stream_rng(seed, r as u64))?;
            Ok(Replicate { draw_index: row, data })
        })
        .collect()
}

/// Scaled mean and 80% scaled IQR of a dataset.
pub fn scalar_summaries(data: &[FuzzyObservation]) -> (f64, f64) {
    let mut scaled: Vec<f64> = data.iter().map(FuzzyObservation::scaled).collect();
    scaled.sort_by(f64::total_cmp);
    (mean(&scaled), quantile_sorted(&scaled, 0.9) - quantile_sorted(&scaled, 0.1))
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 2 {
        return Err(invalid("distance grid needs at least 2 points"));
    }
    Ok(())
}

/// Membership of a Beta-type outcome at `t_j = j/(grid−1)`.
pub fn membership_profile(obs: &FuzzyObservation, grid: usize) -> Vec<f64> {
    let m = obs.scaled();
    (0..grid).map(|j| unit_membership(m, obs.h, j as f64 / (grid - 1) as f64)).collect()
}

/// Membership of a raw granular count at `t_j·K`, interpolating linearly between counts.
pub fn raw_membership_profile(mv: &MembershipVector, grid: usize) -> Vec<f64> {
    let k = mv.k_max() as f64;
    (0..grid)
        .map(|j| {
            let x = k * j as f64 / (grid - 1) as f64;
            let lo = libm::floor(x) as usize;
            let hi = (lo + 1).min(mv.k_max());
            let w = x - lo as f64;
            (1.0 - w) * mv.get(lo) + w * mv.get(hi)
        })
        .collect()
}

/// Root-mean-square difference of two profiles of equal length.
pub fn profile_distance(a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    sqrt(pairwise_sum(&sq) / a.len() as f64)
}

/// RMS distance between the membership functions of `a` and `b` on the unit grid.
pub fn fuzzy_distance(a: &BetaFuzzy, b: &BetaFuzzy, grid: usize) -> Result<f64> {
    check_grid(grid)?;
    let profile =
        |f: &BetaFuzzy| -> Vec<f64> { (0..grid).map(|j| f.membership_at_unit(j as f64 / (grid - 1) as f64)).collect() };
    Ok(profile_distance(&profile(a), &profile(b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyStats {
    /// Mean distance over unordered pairs of observed outcomes.
    pub u_obs: f64,
    /// Mean distance over unordered pairs of replicated outcomes.
    pub u_rep: f64,
    /// Mean distance over all observed × replicated pairs.
    pub u_cross: f64,
}

/// Mean distance over unordered pairs `i < j`; NaN for fewer than two profiles.
pub fn within_mean_distance(profiles: &[Vec<f64>]) -> f64 {
    let n = profiles.len();
    if n < 2 {
        return f64::NAN;
    }
    let d: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| profile_distance(&profiles[i], &profiles[j]))
        .collect();
    pairwise_sum(&d) / d.len() as f64
}

/// Mean distance over all pairs drawn one from each sample.
pub fn cross_mean_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let d: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| profile_distance(x, y))).collect();
    pairwise_sum(&d) / d.len() as f64
}

/// Energy-like components from precomputed membership profiles.
pub fn energy_from_profiles(observed: &[Vec<f64>], replicated: &[Vec<f64>]) -> Result<EnergyStats> {
    if observed.is_empty() || replicated.is_empty() {
        return Err(invalid("energy components need non-empty samples"));
    }
    Ok(EnergyStats {
        u_obs: within_mean_distance(observed),
        u_rep: within_mean_distance(replicated),
        u_cross: cross_mean_distance(observed, replicated),
    })
}

pub fn energy_components(
    observed: &[FuzzyObservation],
    replicated: &[FuzzyObservation],
    grid: usize,
) -> Result<EnergyStats> {
    check_grid(grid)?;
    let obs: Vec<Vec<f64>> = observed.iter().map(|o| membership_profile(o, grid)).collect();
    let rep: Vec<Vec<f64>> = replicated.iter().map(|o| membership_profile(o, grid)).collect();
    energy_from_profiles(&obs, &rep)
}

/// Fraction of replicated statistics above the observed one, counting ties as one half.
pub fn tail_probability(replicated: &[f64], observed: f64) -> f64 {
    let above = replicated.iter().filter(|&&r| r > observed).count() as f64;
    let ties = replicated.iter().filter(|&&r| r == observed).count() as f64;
    (above + 0.5 * ties) / replicated.len() as f64
}

/// Per-replicate statistics of a posterior predictive check.
#[derive(Debug, Clone, PartialEq)]
pub struct PpcSummary {
    pub observed_mean: f64,
    pub observed_iqr80: f64,
    pub u_obs: f64,
    pub rep_mean: Vec<f64>,
    pub rep_iqr80: Vec<f64>,
    pub u_rep: Vec<f64>,
    pub u_cross: Vec<f64>,
    pub draw_index: Vec<usize>,
    pub p_mean: f64,
    pub p_iqr80: f64,
}

impl PpcSummary {
    pub fn n_reps(&self) -> usize {
        self.rep_mean.len()
    }

    pub fn energy(&self, r: usize) -> EnergyStats {
        EnergyStats { u_obs: self.u_obs, u_rep: self.u_rep[r], u_cross: self.u_cross[r] }
    }

    /// Mean of `|u_cross − u_obs|` over replicates.
    pub fn mean_cross_gap(&self) -> f64 {
        mean(&self.u_cross.iter().map(|u| (u - self.u_obs).abs()).collect::<Vec<_>>())
    }
}

/// Summarizes replicated datasets against the observed data.
pub fn summarize_replicates(
    observed: &[FuzzyObservation],
    replicates: &[Replicate],
    grid: usize,
) -> Result<PpcSummary> {
    check_grid(grid)?;
    if observed.is_empty() || replicates.is_empty() {
        return Err(invalid("posterior predictive check needs observed data and replicates"));
    }
    let (observed_mean, observed_iqr80) = scalar_summaries(observed);
    let obs_profiles: Vec<Vec<f64>> = observed.iter().map(|o| membership_profile(o, grid)).collect();
    let u_obs = within_mean_distance(&obs_profiles);
    let mut out = PpcSummary {
        observed_mean,
        observed_iqr80,
        u_obs,
        rep_mean: Vec::with_capacity(replicates.len()),
        rep_iqr80: Vec::with_capacity(replicates.len()),
        u_rep: Vec::with_capacity(replicates.len()),
        u_cross: Vec::with_capacity(replicates.len()),
        draw_index: Vec::with_capacity(replicates.len()),
        p_mean: 0.0,
        p_iqr80: 0.0,
    };
    for rep in replicates {
        let (m, iqr) = scalar_summaries(&rep.data.observations);
        let profiles: Vec<Vec<f64>> = rep.data.observations.iter().map(|o| membership_profile(o, grid)).collect();
        let e = energy_from_profiles(&obs_profiles, &profiles)?;
        out.rep_mean.push(m);
        out.rep_iqr80.push(iqr);
        out.u_rep.push(e.u_rep);
        out.u_cross.push(e.u_cross);
        out.draw_index.push(rep.draw_index);
    }
    out.p_mean = tail_probability(&out.rep_mean, observed_mean);
    out.p_iqr80 = tail_probability(&out.rep_iqr80, observed_iqr80);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn obs(c: f64, h: f64, k: usize) -> FuzzyObservation {
        FuzzyObservation::new(c, h, k).unwrap()
    }

    #[test]
    fn summaries_of_tenths() {
        let data: Vec<_> = (1..=10).map(|i| obs(i as f64, 5.0, 10)).collect();
        let (m, iqr) = scalar_summaries(&data);
        assert!((m - 0.55).abs() < 1e-12);
        assert!((iqr - 0.72).abs() < 1e-12);
        let scaled: Vec<_> = (1..=10).map(|i| obs(10.0 * i as f64, 5.0, 100)).collect();
        let (m2, iqr2) = scalar_summaries(&scaled);
        assert!((m - m2).abs() < 1e-12 && (iqr - iqr2).abs() < 1e-12);
    }

    #[test]
    fn constant_data_has_zero_iqr() {
        let data = vec![obs(3.0, 5.0, 10); 7];
        assert_eq!(scalar_summaries(&data).1, 0.0);
    }

    #[test]
    fn distance_fixture_matches_direct_sum() {
        let a = BetaFuzzy::new(3.0, 20.0, 10).unwrap();
        let b = BetaFuzzy::new(7.0, 20.0, 10).unwrap();
        let d = fuzzy_distance(&a, &b, 101).unwrap();
        let mut s = 0.0;
        for j in 0..101 {
            let t = j as f64 / 100.0;
            let kl = |m: f64| m * libm::log(m / t) + (1.0 - m) * libm::log((1.0 - m) / (1.0 - t));
            let fa = if t == 0.0 || t == 1.0 { 0.0 } else { libm::exp(-20.0 * kl(0.3)) };
            let fb = if t == 0.0 || t == 1.0 { 0.0 } else { libm::exp(-20.0 * kl(0.7)) };
            s += (fa - fb) * (fa - fb);
        }
        assert!((d - libm::sqrt(s / 101.0)).abs() < 1e-12);
        assert!(d > 0.0);
        assert_eq!(fuzzy_distance(&a, &a, 101).unwrap(), 0.0);
        assert_eq!(d, fuzzy_distance(&b, &a, 101).unwrap());
    }

    #[test]
    fn identical_samples() {
        let data = vec![obs(2.0, 8.0, 10), obs(5.0, 3.0, 10), obs(9.0, 30.0, 10)];
        let e = energy_components(&data, &data, 101).unwrap();
        assert_eq!(e.u_obs, e.u_rep);
        assert!((e.u_cross - 2.0 / 3.0 * e.u_obs).abs() < 1e-12);
        let same = vec![obs(4.0, 8.0, 10); 4];
        let e = energy_components(&same, &same, 101).unwrap();
        assert_eq!((e.u_obs, e.u_rep, e.u_cross), (0.0, 0.0, 0.0));
    }

    #[test]
    fn singleton_within_is_nan() {
        let e = energy_components(&[obs(2.0, 8.0, 10)], &[obs(3.0, 8.0, 10), obs(4.0, 2.0, 10)], 11).unwrap();
        assert!(e.u_obs.is_nan());
        assert!(e.u_rep.is_finite());
    }

    #[test]
    fn thinning_is_systematic() {
        assert_eq!(thin_indices(10, 5).unwrap(), vec![0, 2, 4, 6, 8]);
        assert_eq!(thin_indices(3, 3).unwrap(), vec![0, 1, 2]);
        assert!(matches!(thin_indices(3, 4), Err(Error::NotEnoughDraws { .. })));
    }

    #[test]
    fn tail_probability_counts_ties_half() {
        assert_eq!(tail_probability(&[1.0, 2.0, 3.0, 4.0], 2.0), 0.625);
    }
}
