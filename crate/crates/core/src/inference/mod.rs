//! Hamiltonian Monte Carlo over an unconstrained parameter space.
//!
//! Each chain runs plain HMC with a diagonal mass matrix and a uniformly jittered number of
//! leapfrog steps. Warmup adapts the step size by dual averaging toward a target acceptance
//! statistic and estimates the mass matrix from the second half of warmup. Chains are
//! independent given `(seed, chain)` and can be run on separate threads; [`PosteriorDraws`]
//! merges them in chain order.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

mod diagnostics;
mod hmc;

pub use diagnostics::{ess_bulk, split_rhat, summarize, ParamSummary, RHAT_THRESHOLD};
pub use hmc::{find_reasonable_step_size, leapfrog, run_chain, sample, ChainDraws, LeapfrogOutput};

/// A differentiable log density on `R^dim`.
///
/// Implementations must be usable concurrently from several chains; returning a non-finite
/// value marks the point as outside the support.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density at `position`.
    fn log_density_and_grad(&self, position: &[f64], grad: &mut [f64]) -> f64;
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density_and_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        (**self).log_density_and_grad(position, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmcConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_draws: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian jitter added to the initial point.
    pub init_jitter: f64,
    /// Upper end of the jittered integration time; steps per transition are drawn uniformly
    /// from `1..=min(max_leapfrog, ⌈path_length/ε⌉)`.
    pub path_length: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 1000,
            n_draws: 1000,
            target_accept: 0.8,
            max_leapfrog: 512,
            seed: 1,
            init_jitter: 0.5,
            path_length: 3.0,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(invalid("n_chains must be at least 1"));
        }
        if self.n_draws == 0 {
            return Err(invalid("n_draws must be at least 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(invalid("target_accept must lie in (0, 1)"));
        }
        if self.max_leapfrog == 0 {
            return Err(invalid("max_leapfrog must be at least 1"));
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(invalid("init_jitter must be non-negative"));
        }
        if !(self.path_length > 0.0 && self.path_length.is_finite()) {
            return Err(invalid("path_length must be positive"));
        }
        Ok(())
    }
}

/// Merged draws of all chains on the constrained scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub n_chains: usize,
    pub n_draws: usize,
    /// One row per draw, chain-major: row `chain·n_draws + iter`.
    pub values: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub divergent: Vec<bool>,
    pub accept_rate: Vec<f64>,
    pub step_size: Vec<f64>,
    pub diagnostics: Vec<ParamSummary>,
}

impl PosteriorDraws {
    /// Merges chains in the order given and maps every draw through `constrain`.
    pub fn from_chains(
        names: Vec<String>,
        chains: &[ChainDraws],
        constrain: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let n_draws = chains.first().map_or(0, |c| c.positions.len());
        if chains.iter().any(|c| c.positions.len() != n_draws) {
            return Err(invalid("chains have different lengths"));
        }
        let values: Vec<Vec<f64>> = chains.iter().flat_map(|c| c.positions.iter().map(|q| constrain(q))).collect();
        let energy = chains.iter().flat_map(|c| c.energy.iter().copied()).collect();
        let divergent = chains.iter().flat_map(|c| c.divergent.iter().copied()).collect();
        let accept_rate = chains.iter().map(|c| crate::stats::mean(&c.accept_stat)).collect();
        let step_size = chains.iter().map(|c| c.step_size).collect();
        Self::from_rows(names, chains.len(), values, energy, divergent, accept_rate, step_size)
    }

    /// Rebuilds draws from stored rows and recomputes diagnostics.
    pub fn from_rows(
        names: Vec<String>,
        n_chains: usize,
        values: Vec<Vec<f64>>,
        energy: Vec<f64>,
        divergent: Vec<bool>,
        accept_rate: Vec<f64>,
        step_size: Vec<f64>,
    ) -> Result<Self> {
        if n_chains == 0 || values.is_empty() || !values.len().is_multiple_of(n_chains) {
            return Err(invalid("draw count must be a positive multiple of the chain count"));
        }
        if values.iter().any(|r| r.len() != names.len()) {
            return Err(invalid("every draw needs one value per parameter"));
        }
        if energy.len() != values.len() || divergent.len() != values.len() {
            return Err(invalid("energy and divergence columns must match the draws"));
        }
        let n_draws = values.len() / n_chains;
        let diagnostics = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let column: Vec<f64> = values.iter().map(|r| r[j]).collect();
                let chains: Vec<&[f64]> = column.chunks(n_draws).collect();
                summarize(name, &chains)
            })
            .collect();
        Ok(Self { names, n_chains, n_draws, values, energy, divergent, accept_rate, step_size, diagnostics })
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Index of the chain that produced row `row`.
    pub fn chain_of(&self, row: usize) -> usize {
        row / self.n_draws
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|j| self.column(j))
    }

    pub fn divergences(&self) -> usize {
        self.divergent.iter().filter(|&&d| d).count()
    }

    pub fn max_rhat(&self) -> Option<f64> {
        self.diagnostics.iter().filter_map(|d| d.rhat).fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}
