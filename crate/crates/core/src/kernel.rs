//! The fuzzy-reporting kernel over a finite outcome set.
//!
//! Given outcomes `M = {ξ}` with reference mass `ν`, the report law given the latent count is
//! `φ(y, A) = Σ_{ξ∈A} ξ(y)·ν(ξ) / c(y)` with `c(y) = Σ_{ξ∈M} ξ(y)·ν(ξ)`. The probability of
//! reporting `ξ` moves with `y` through `ξ(y)/c(y)`, so CAR holds for `ξ` only when that ratio
//! is flat on the compatibility set `{y : ξ(y) > 0}`.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::possibility::MembershipVector;

/// Default relative tolerance of [`ReportingKernel::is_car`].
pub const DEFAULT_CAR_TOLERANCE: f64 = 1e-9;

/// Distribution of the latent count on `{0, …, K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCountModel {
    pmf: Vec<f64>,
}

impl LatentCountModel {
    /// Accepts a non-negative vector summing to 1 within 1e-9.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(invalid("pmf needs at least one entry"));
        }
        if pmf.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(invalid("pmf entries must be finite and non-negative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(alloc::format!("pmf sums to {total}, not 1")));
        }
        Ok(Self { pmf })
    }

    pub(crate) fn from_normalized(pmf: Vec<f64>) -> Self {
        Self { pmf }
    }

    pub fn uniform(k_max: usize) -> Self {
        let p = 1.0 / (k_max + 1) as f64;
        Self { pmf: alloc::vec![p; k_max + 1] }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.pmf
    }

    pub fn k_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(y, p)| y as f64 * p).sum()
    }
}

/// Zadeh probability `C_θ(ξ) = Σ_y ξ(y)·P_θ[Y = y]`.
pub fn zadeh_probability(mv: &MembershipVector, latent: &LatentCountModel) -> Result<f64> {
    if mv.values().len() != latent.pmf.len() {
        return Err(Error::LengthMismatch { expected: latent.pmf.len(), got: mv.values().len() });
    }
    Ok(mv.values().iter().zip(&latent.pmf).map(|(x, p)| x * p).sum())
}

/// Outcome of the CAR check for one outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarVerdict {
    pub is_car: bool,
    /// The pair of compatible counts whose ratios `ξ(y)/c(y)` are furthest apart, in
    /// increasing order of `y`. Present only when CAR fails.
    pub witness: Option<(usize, usize)>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Reporting kernel over a finite set of outcomes sharing the truncation level `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportingKernel {
    outcomes: Vec<MembershipVector>,
    nu: Vec<f64>,
    normalizer: Vec<f64>,
}

impl ReportingKernel {
    /// Validates `ν` (non-negative, sums to 1 within 1e-9), the shared `K`, and `c(y) > 0`
    /// for every `y`.
    pub fn new(outcomes: Vec<MembershipVector>, nu: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(invalid("outcome set is empty"));
        }
        if nu.len() != outcomes.len() {
            return Err(Error::LengthMismatch { expected: outcomes.len(), got: nu.len() });
        }
        if nu.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(invalid("reference mass must be finite and non-negative"));
        }
        let total: f64 = nu.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(alloc::format!("reference mass sums to {total}, not 1")));
        }
        let k_max = outcomes[0].k_max();
        if let Some(bad) = outcomes.iter().find(|o| o.k_max() != k_max) {
            return Err(Error::LengthMismatch { expected: k_max + 1, got: bad.values().len() });
        }
        let normalizer: Vec<f64> =
            (0..=k_max).map(|y| outcomes.iter().zip(&nu).map(|(o, w)| o.get(y) * w).sum()).collect();
        if let Some(y) = normalizer.iter().position(|&c| c <= 0.0) {
            return Err(Error::ZeroNormalizer { y });
        }
        Ok(Self { outcomes, nu, normalizer })
    }

    /// Kernel with uniform reference mass.
    pub fn uniform(outcomes: Vec<MembershipVector>) -> Result<Self> {
        let n = outcomes.len();
        Self::new(outcomes, alloc::vec![1.0 / n.max(1) as f64; n])
    }

    pub fn outcomes(&self) -> &[MembershipVector] {
        &self.outcomes
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn k_max(&self) -> usize {
        self.normalizer.len() - 1
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    fn check_y(&self, y: usize) -> Result<()> {
        if y > self.k_max() {
            return Err(Error::IndexOutOfRange { index: y, len: self.k_max() + 1 });
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.outcomes.len() {
            return Err(Error::IndexOutOfRange { index, len: self.outcomes.len() });
        }
        Ok(())
    }

    /// `c(y) = Σ_ξ ξ(y)·ν(ξ)`.
    pub fn normalizer(&self, y: usize) -> Result<f64> {
        self.check_y(y)?;
        Ok(self.normalizer[y])
    }

    /// `φ(y, A)` for the outcome subset `A` given by indices. Repeated indices count once.
    pub fn kernel_prob(&self, y: usize, subset: &[usize]) -> Result<f64> {
        self.check_y(y)?;
        let mut seen = alloc::vec![false; self.outcomes.len()];
        let mut acc = 0.0;
        for &i in subset {
            self.check_index(i)?;
            if !core::mem::replace(&mut seen[i], true) {
                acc += self.outcomes[i].get(y) * self.nu[i];
            }
        }
        Ok(acc / self.normalizer[y])
    }

    /// The full matrix `φ(y, {ξ_j})`, one row per `y`.
    pub fn kernel_matrix(&self) -> Vec<Vec<f64>> {
        (0..=self.k_max())
            .map(|y| self.outcomes.iter().zip(&self.nu).map(|(o, w)| o.get(y) * w / self.normalizer[y]).collect())
            .collect()
    }

    /// `P_θ[Ξ = ξ] = ν(ξ)·Σ_y ξ(y)·P_θ[Y = y] / c(y)`.
    pub fn marginal_outcome_prob(&self, latent: &LatentCountModel, index: usize) -> Result<f64> {
        self.check_index(index)?;
        if latent.pmf.len() != self.normalizer.len() {
            return Err(Error::LengthMismatch { expected: self.normalizer.len(), got: latent.pmf.len() });
        }
        let xi = self.outcomes[index].values();
        let s: f64 = xi.iter().zip(&latent.pmf).zip(&self.normalizer).map(|((x, p), c)| x * p / c).sum();
        Ok(self.nu[index] * s)
    }

    /// Outcome-wise CAR check: the ratios `ξ(y)/c(y)` over the compatibility set must agree to
    /// within `tol·(1 + |mean ratio|)`.
    pub fn is_car(&self, index: usize, tol: f64) -> Result<CarVerdict> {
        self.check_index(index)?;
        if self.nu[index] <= 0.0 {
            return Err(invalid(alloc::format!("outcome {index} has zero reference mass")));
        }
        let xi = self.outcomes[index].values();
        let ratios: Vec<(usize, f64)> = xi
            .iter()
            .zip(&self.normalizer)
            .enumerate()
            .filter(|(_, (&x, _))| x > 0.0)
            .map(|(y, (x, c))| (y, x / c))
            .collect();
        if ratios.is_empty() {
            return Err(Error::EmptyCompatibilitySet { index });
        }
        let (mut y_min, mut r_min) = ratios[0];
        let (mut y_max, mut r_max) = ratios[0];
        for &(y, r) in &ratios[1..] {
            if r < r_min {
                (y_min, r_min) = (y, r);
            }
            if r > r_max {
                (y_max, r_max) = (y, r);
            }
        }
        let mean = ratios.iter().map(|(_, r)| r).sum::<f64>() / ratios.len() as f64;
        let is_car = r_max - r_min <= tol * (1.0 + mean.abs());
        let witness = (!is_car).then(|| (y_min.min(y_max), y_min.max(y_max)));
        Ok(CarVerdict { is_car, witness, min_ratio: r_min, max_ratio: r_max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn worked_example() -> ReportingKernel {
        let xi1 = MembershipVector::new(vec![1.0, 0.5, 0.5, 0.25]).unwrap();
        let xi2 = MembershipVector::new(vec![0.25, 0.5, 1.0, 1.0]).unwrap();
        ReportingKernel::uniform(vec![xi1, xi2]).unwrap()
    }

    #[test]
    fn worked_example_values() {
        let k = worked_example();
        assert_eq!(k.normalizer(0).unwrap(), 5.0 / 8.0);
        assert!((k.kernel_prob(0, &[0]).unwrap() - 0.8).abs() < 1e-12);
        assert!((k.kernel_prob(3, &[0]).unwrap() - 0.2).abs() < 1e-12);
        let v = k.is_car(0, DEFAULT_CAR_TOLERANCE).unwrap();
        assert!(!v.is_car);
        assert_eq!(v.witness, Some((0, 3)));
        assert!((v.max_ratio - 1.6).abs() < 1e-12 && (v.min_ratio - 0.4).abs() < 1e-12);
    }

    #[test]
    fn worked_example_marginal_with_uniform_latent() {
        let k = worked_example();
        let p = k.marginal_outcome_prob(&LatentCountModel::uniform(3), 0).unwrap();
        let expected = 0.25 * (4.0 / 5.0 + 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0);
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn singletons_and_trivial_subsets() {
        let xi = MembershipVector::new(vec![0.5, 1.0]).unwrap();
        let k = ReportingKernel::new(vec![xi], vec![1.0]).unwrap();
        assert_eq!(k.normalizer(0).unwrap(), 0.5);
        assert_eq!(k.kernel_prob(0, &[0]).unwrap(), 1.0);
        assert_eq!(k.kernel_prob(1, &[]).unwrap(), 0.0);
        assert!(k.is_car(0, DEFAULT_CAR_TOLERANCE).unwrap().is_car);
        let latent = LatentCountModel::new(vec![0.3, 0.7]).unwrap();
        assert!((k.marginal_outcome_prob(&latent, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_all_ones_normalizer() {
        let ones = MembershipVector::new(vec![1.0; 3]).unwrap();
        let k = ReportingKernel::uniform(vec![ones.clone(), ones.clone(), ones]).unwrap();
        for y in 0..3 {
            assert!((k.normalizer(y).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disjoint_indicators_are_car() {
        let a = MembershipVector::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let b = MembershipVector::new(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let k = ReportingKernel::uniform(vec![a, b]).unwrap();
        for i in 0..2 {
            let v = k.is_car(i, DEFAULT_CAR_TOLERANCE).unwrap();
            assert!(v.is_car && v.witness.is_none());
            assert_eq!(v.min_ratio, 2.0);
        }
    }

    #[test]
    fn zero_normalizer_is_reported() {
        let a = MembershipVector::new(vec![1.0, 0.0, 0.5]).unwrap();
        assert_eq!(ReportingKernel::uniform(vec![a]), Err(Error::ZeroNormalizer { y: 1 }));
    }

    #[test]
    fn zadeh_probability_examples() {
        let latent = LatentCountModel::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let mv = MembershipVector::new(vec![1.0, 0.5, 0.25, 0.0]).unwrap();
        assert!((zadeh_probability(&mv, &latent).unwrap() - 0.6).abs() < 1e-15);
        let ones = MembershipVector::new(vec![1.0; 4]).unwrap();
        assert!((zadeh_probability(&ones, &latent).unwrap() - 1.0).abs() < 1e-15);
        let ind = MembershipVector::crisp(2, 3).unwrap();
        assert_eq!(zadeh_probability(&ind, &latent).unwrap(), 0.2);
        let short = MembershipVector::new(vec![1.0; 3]).unwrap();
        assert!(zadeh_probability(&short, &latent).is_err());
    }

    #[test]
    fn is_car_errors() {
        let k = worked_example();
        assert!(k.is_car(2, 1e-9).is_err());
        let a = MembershipVector::new(vec![1.0, 1.0]).unwrap();
        let b = MembershipVector::new(vec![0.0, 0.0]).unwrap();
        let k = ReportingKernel::new(vec![a.clone(), b.clone()], vec![1.0, 0.0]).unwrap();
        assert!(k.is_car(1, 1e-9).is_err());
        let k = ReportingKernel::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        assert_eq!(k.is_car(1, 1e-9), Err(Error::EmptyCompatibilitySet { index: 1 }));
    }
}
