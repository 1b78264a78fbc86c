use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{log10, sqrt};

use crate::special::normal_quantile;
use crate::stats::{mean, quantile_type7, variance};

/// Split R̂ above this value raises a convergence flag.
pub const RHAT_THRESHOLD: f64 = 1.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q95: f64,
    /// `None` with a single chain; NaN when every draw is identical.
    pub rhat: Option<f64>,
    pub ess_bulk: f64,
    /// Raised when R̂ exceeds [`RHAT_THRESHOLD`] or is undefined.
    pub flagged: bool,
}

/// Halves of every chain; the middle draw of an odd-length chain is dropped.
fn split_chains<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [&c[..half], &c[c.len() - half..]]
        })
        .collect()
}

/// Replaces draws by normal scores of their pooled fractional ranks (average rank for ties).
fn rank_normalize(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let s = all.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| all[a].total_cmp(&all[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && all[order[j + 1]] == all[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let z: Vec<f64> = ranks.iter().map(|r| normal_quantile((r - 0.375) / (s as f64 + 0.25))).collect();
    let mut out = Vec::with_capacity(chains.len());
    let mut offset = 0;
    for c in chains {
        out.push(z[offset..offset + c.len()].to_vec());
        offset += c.len();
    }
    out
}

fn plain_rhat(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b = n * variance(&means);
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / m;
    if !(w > 0.0) {
        return f64::NAN;
    }
    sqrt(((n - 1.0) / n * w + b / n) / w)
}

/// Rank-normalized split R̂: the larger of the bulk and folded (tail) versions.
///
/// Returns NaN when fewer than two chains are given, chains are too short to split, or all
/// draws coincide.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    if chains.len() < 2 || chains.iter().any(|c| c.len() < 4 || c.len() != chains[0].len()) {
        return f64::NAN;
    }
    let split = split_chains(chains);
    let bulk = plain_rhat(&rank_normalize(&split));
    let all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let median = quantile_type7(&all, 0.5);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|x| (x - median).abs()).collect()).collect();
    let folded_refs: Vec<&[f64]> = folded.iter().map(|c| c.as_slice()).collect();
    let tail = plain_rhat(&rank_normalize(&folded_refs));
    if bulk.is_nan() || tail.is_nan() {
        return f64::NAN;
    }
    bulk.max(tail)
}

/// Effective sample size by Geyer's initial monotone sequence over chains of equal length.
fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| (0..n - lag).map(|i| (c[i] - mu) * (c[i + lag] - mu)).sum::<f64>() / nf)
            .sum::<f64>()
            / m as f64
    };
    let acov0 = acov(0);
    let mean_var = acov0 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += variance(&means);
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let rho = |lag: usize| if lag == 0 { 1.0 } else { 1.0 - (mean_var - acov(lag)) / var_plus };

    let mut tau_sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau_sum += pair;
        prev_pair = pair;
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = (2.0 * tau_sum - 1.0).max(1.0 / log10(total));
    total / tau
}

/// Bulk effective sample size: ESS of the rank-normalized split chains.
pub fn ess_bulk(chains: &[&[f64]]) -> f64 {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4 || c.len() != chains[0].len()) {
        return f64::NAN;
    }
    let split = split_chains(chains);
    let all: Vec<f64> = split.iter().flat_map(|c| c.iter().copied()).collect();
    if all.iter().all(|&x| x == all[0]) {
        return f64::NAN;
    }
    ess(&rank_normalize(&split))
}

/// Posterior summary of one parameter given its per-chain draws.
pub fn summarize(name: &str, chains: &[&[f64]]) -> ParamSummary {
    let all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let rhat = (chains.len() >= 2).then(|| split_rhat(chains));
    let flagged = rhat.is_some_and(|r| r.is_nan() || r > RHAT_THRESHOLD);
    ParamSummary {
        name: name.to_string(),
        mean: mean(&all),
        sd: sqrt(variance(&all)),
        q05: quantile_type7(&all, 0.05),
        q95: quantile_type7(&all, 0.95),
        rhat,
        ess_bulk: ess_bulk(chains),
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_chains(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    fn refs(c: &[Vec<f64>]) -> Vec<&[f64]> {
        c.iter().map(|v| v.as_slice()).collect()
    }

    #[test]
    fn iid_draws_look_converged() {
        let chains = gaussian_chains(4, 1000, 3);
        let r = split_rhat(&refs(&chains));
        assert!((0.99..=1.01).contains(&r), "rhat {r}");
        assert!(ess_bulk(&refs(&chains)) >= 2000.0);
    }

    #[test]
    fn shifted_chain_is_flagged() {
        let mut chains = gaussian_chains(4, 1000, 4);
        chains[2].iter_mut().for_each(|x| *x += 5.0);
        let s = summarize("x", &refs(&chains));
        assert!(s.rhat.unwrap() > 1.2);
        assert!(s.flagged);
    }

    #[test]
    fn constant_chains_give_nan_with_flag() {
        let chains = vec![vec![1.5; 100]; 3];
        let s = summarize("x", &refs(&chains));
        assert!(s.rhat.unwrap().is_nan());
        assert!(s.flagged);
        assert!(s.ess_bulk.is_nan());
    }

    #[test]
    fn single_chain_omits_rhat() {
        let chains = gaussian_chains(1, 500, 5);
        let s = summarize("x", &refs(&chains));
        assert!(s.rhat.is_none());
        assert!(!s.flagged);
        assert!(s.ess_bulk > 250.0);
    }

    #[test]
    fn autocorrelated_chain_has_lower_ess() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let mut chains = vec![];
        for _ in 0..4 {
            let mut x = 0.0;
            let c: Vec<f64> = (0..1000)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    x = 0.9 * x + e;
                    x
                })
                .collect();
            chains.push(c);
        }
        // AR(1) with φ = 0.9: τ = (1+φ)/(1−φ) = 19.
        let e = ess_bulk(&refs(&chains));
        assert!(e > 4000.0 / 19.0 / 2.0 && e < 4000.0 / 19.0 * 2.0, "ess {e}");
    }
}
