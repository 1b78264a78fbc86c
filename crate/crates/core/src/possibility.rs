//! Possibility assignments and granular counting.
//!
//! A [`PossibilityAssignment`] holds the degree `π_o(r)` to which observation `o` may be
//! assigned to referent `r`. The granular count of a referent is the fuzzy set over
//! `{0, …, K}` whose membership at `y` is the best max–min compatibility of any split of the
//! observations into `y` assigned to the referent and `K − y` assigned elsewhere.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Largest instance [`granular_count_bruteforce`] accepts; it enumerates `2^n_obs` subsets.
pub const BRUTEFORCE_LIMIT: usize = 20;

/// Dense `n_obs × n_ref` matrix of possibility degrees in `[0, 1]`, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct PossibilityAssignment {
    n_obs: usize,
    n_ref: usize,
    degrees: Vec<f64>,
}

impl PossibilityAssignment {
    pub fn new(n_obs: usize, n_ref: usize, degrees: Vec<f64>) -> Result<Self> {
        if n_ref == 0 {
            return Err(invalid("at least one referent is required"));
        }
        if degrees.len() != n_obs * n_ref {
            return Err(Error::LengthMismatch { expected: n_obs * n_ref, got: degrees.len() });
        }
        if let Some(pos) = degrees.iter().position(|d| !(0.0..=1.0).contains(d)) {
            return Err(invalid(alloc::format!(
                "degree {} at observation {}, referent {} is outside [0, 1]",
                degrees[pos],
                pos / n_ref,
                pos % n_ref
            )));
        }
        Ok(Self { n_obs, n_ref, degrees })
    }

    /// Builds an assignment from one row of degrees per observation.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_ref = rows.first().map_or(0, |r| r.as_ref().len());
        let mut degrees = Vec::with_capacity(rows.len() * n_ref);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_ref {
                return Err(Error::LengthMismatch { expected: n_ref, got: row.len() });
            }
            degrees.extend_from_slice(row);
        }
        Self::new(rows.len(), n_ref, degrees)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_ref(&self) -> usize {
        self.n_ref
    }

    #[inline]
    pub fn degree(&self, obs: usize, referent: usize) -> f64 {
        self.degrees[obs * self.n_ref + referent]
    }

    pub fn row(&self, obs: usize) -> &[f64] {
        &self.degrees[obs * self.n_ref..(obs + 1) * self.n_ref]
    }

    /// True iff every observation has some referent with degree exactly 1.
    pub fn is_normalized(&self) -> bool {
        (0..self.n_obs).all(|o| self.row(o).contains(&1.0))
    }

    fn check_referent(&self, referent: usize) -> Result<()> {
        if referent >= self.n_ref {
            return Err(Error::IndexOutOfRange { index: referent, len: self.n_ref });
        }
        Ok(())
    }

    fn own_degrees(&self, referent: usize) -> Vec<f64> {
        (0..self.n_obs).map(|o| self.degree(o, referent)).collect()
    }
}

/// A membership function over the truncated count space `{0, …, K}`.
///
/// Entries lie in `[0, 1]`. Normalization (`max = 1`) and a non-empty support are not enforced
/// here: a granular count over observations that are compatible with nothing has empty
/// support, and operations that need a proper fuzzy set check for it.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVector {
    xi: Vec<f64>,
}

impl MembershipVector {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.is_empty() {
            return Err(invalid("membership vector needs at least one entry"));
        }
        if let Some(pos) = xi.iter().position(|d| !(0.0..=1.0).contains(d)) {
            return Err(invalid(alloc::format!("membership {} at y = {pos} is outside [0, 1]", xi[pos])));
        }
        Ok(Self { xi })
    }

    /// Crisp indicator of `{y}` on `{0, …, k_max}`.
    pub fn crisp(y: usize, k_max: usize) -> Result<Self> {
        if y > k_max {
            return Err(Error::IndexOutOfRange { index: y, len: k_max + 1 });
        }
        let mut xi = vec![0.0; k_max + 1];
        xi[y] = 1.0;
        Ok(Self { xi })
    }

    /// Truncation level K.
    pub fn k_max(&self) -> usize {
        self.xi.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.xi
    }

    pub fn get(&self, y: usize) -> f64 {
        self.xi.get(y).copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.xi.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_normalized(&self) -> bool {
        self.max() == 1.0
    }

    /// `{y : ξ(y) > 0}` in increasing order.
    pub fn support(&self) -> Vec<usize> {
        self.xi.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(y, _)| y).collect()
    }

    pub fn support_is_empty(&self) -> bool {
        self.xi.iter().all(|&v| v == 0.0)
    }
}

/// `q[o] = max_{r' ≠ r} π_o(r')`, the degree to which each observation may belong elsewhere.
///
/// With a single referent the alternative set is empty and its maximum is taken as 0.
pub fn complement_degrees(assign: &PossibilityAssignment, referent: usize) -> Result<Vec<f64>> {
    assign.check_referent(referent)?;
    Ok((0..assign.n_obs)
        .map(|o| assign.row(o).iter().enumerate().filter(|&(r, _)| r != referent).map(|(_, &d)| d).fold(0.0, f64::max))
        .collect())
}

/// Granular count by enumerating every subset of observations.
///
/// Exponential in `n_obs`; used as the reference oracle for [`granular_count_fast`].
pub fn granular_count_bruteforce(assign: &PossibilityAssignment, referent: usize) -> Result<MembershipVector> {
    assign.check_referent(referent)?;
    let n = assign.n_obs;
    if n > BRUTEFORCE_LIMIT {
        return Err(Error::TooLargeForOracle { n_obs: n, limit: BRUTEFORCE_LIMIT });
    }
    let own = assign.own_degrees(referent);
    let other = complement_degrees(assign, referent)?;
    let mut xi = vec![0.0f64; n + 1];
    for mask in 0u32..(1u32 << n) {
        // min over the empty set is 1
        let mut value = 1.0f64;
        for o in 0..n {
            let d = if mask & (1 << o) != 0 { own[o] } else { other[o] };
            value = value.min(d);
        }
        let y = mask.count_ones() as usize;
        xi[y] = xi[y].max(value);
    }
    Ok(MembershipVector { xi })
}

/// Granular count by a sweep over possibility thresholds, `O(K log K)`.
///
/// `ξ(y) ≥ α` holds iff some `y`-subset contains every observation whose complement degree is
/// below `α` and only observations with own degree at least `α`. That is feasible exactly
/// when `α ≤ min_o max(π_o(r), q_o)` and `#{q_o < α} ≤ y ≤ #{π_o(r) ≥ α}`. Feasible intervals
/// grow as `α` decreases, so each `y` takes the largest candidate whose interval first covers
/// it. The result equals [`granular_count_bruteforce`] exactly since every `ξ(y)` is one of
/// the input degrees or 1.
pub fn granular_count_fast(assign: &PossibilityAssignment, referent: usize) -> Result<MembershipVector> {
    assign.check_referent(referent)?;
    let n = assign.n_obs;
    let own = assign.own_degrees(referent);
    let other = complement_degrees(assign, referent)?;

    let ceiling = own.iter().zip(&other).map(|(&p, &q)| p.max(q)).fold(1.0, f64::min);

    let mut own_sorted = own.clone();
    own_sorted.sort_by(f64::total_cmp);
    let mut other_sorted = other.clone();
    other_sorted.sort_by(f64::total_cmp);

    let mut candidates: Vec<f64> = own.iter().chain(&other).copied().filter(|&a| a > 0.0 && a <= ceiling).collect();
    if ceiling == 1.0 {
        candidates.push(1.0);
    }
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();

    let mut xi = vec![0.0f64; n + 1];
    // covered interval [lo, hi], empty while lo > hi
    let (mut lo, mut hi) = (usize::MAX, 0usize);
    for &alpha in &candidates {
        let mandatory = other_sorted.partition_point(|&q| q < alpha);
        let admissible = n - own_sorted.partition_point(|&p| p < alpha);
        if mandatory > admissible {
            continue;
        }
        if lo > hi {
            xi[mandatory..=admissible].iter_mut().for_each(|v| *v = alpha);
            lo = mandatory;
            hi = admissible;
            continue;
        }
        for v in &mut xi[mandatory..lo] {
            *v = alpha;
        }
        if admissible > hi {
            for v in &mut xi[hi + 1..=admissible] {
                *v = alpha;
            }
        }
        lo = lo.min(mandatory);
        hi = hi.max(admissible);
        if lo == 0 && hi == n {
            break;
        }
    }
    Ok(MembershipVector { xi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn crisp_four() -> PossibilityAssignment {
        PossibilityAssignment::from_rows(&[[1.0, 0.0]; 4]).unwrap()
    }

    #[test]
    fn crisp_assignment_counts_exactly() {
        let a = crisp_four();
        let expected = [0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(granular_count_bruteforce(&a, 0).unwrap().values(), &expected[..]);
        assert_eq!(granular_count_fast(&a, 0).unwrap().values(), &expected[..]);
        // the other referent gets none of them
        assert_eq!(granular_count_fast(&a, 1).unwrap().values(), &[1.0, 0.0, 0.0, 0.0, 0.0][..]);
    }

    #[test]
    fn single_fully_ambiguous_observation() {
        let a = PossibilityAssignment::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(granular_count_bruteforce(&a, 0).unwrap().values(), &[1.0, 1.0][..]);
        assert_eq!(granular_count_fast(&a, 0).unwrap().values(), &[1.0, 1.0][..]);
    }

    #[test]
    fn mixed_three_observation_fixture() {
        // π(r) = (0.9, 0.6, 0.3), complements q = (0.4, 1.0, 0.8)
        let a = PossibilityAssignment::from_rows(&[[0.9, 0.4], [0.6, 1.0], [0.3, 0.8]]).unwrap();
        let brute = granular_count_bruteforce(&a, 0).unwrap();
        // by hand for y = 1: best single pick is o0 -> min(0.9, q1 = 1.0, q2 = 0.8) = 0.8
        assert_eq!(brute.get(1), 0.8);
        assert_eq!(brute.values(), &[0.4, 0.8, 0.6, 0.3][..]);
        assert_eq!(granular_count_fast(&a, 0).unwrap(), brute);
    }

    #[test]
    fn complement_degrees_examples() {
        let a = PossibilityAssignment::from_rows(&[[0.3, 0.9]]).unwrap();
        assert_eq!(complement_degrees(&a, 0).unwrap(), vec![0.9]);
        let a = PossibilityAssignment::from_rows(&[[0.5], [1.0]]).unwrap();
        assert_eq!(complement_degrees(&a, 0).unwrap(), vec![0.0, 0.0]);
        let a = PossibilityAssignment::from_rows(&[[1.0, 0.4, 0.7]]).unwrap();
        assert_eq!(complement_degrees(&a, 0).unwrap(), vec![0.7]);
    }

    #[test]
    fn single_referent_gives_crisp_full_count() {
        let a = PossibilityAssignment::from_rows(&[[0.5], [1.0], [0.7]]).unwrap();
        let xi = granular_count_fast(&a, 0).unwrap();
        assert_eq!(xi.values(), &[0.0, 0.0, 0.0, 0.5][..]);
        assert_eq!(xi, granular_count_bruteforce(&a, 0).unwrap());
    }

    #[test]
    fn referent_out_of_range() {
        let a = crisp_four();
        assert!(matches!(granular_count_fast(&a, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(granular_count_bruteforce(&a, 5), Err(Error::IndexOutOfRange { .. })));
        assert!(complement_degrees(&a, 2).is_err());
    }

    #[test]
    fn bruteforce_guard() {
        let a = PossibilityAssignment::from_rows(&vec![[1.0, 0.0]; 21]).unwrap();
        assert!(matches!(granular_count_bruteforce(&a, 0), Err(Error::TooLargeForOracle { .. })));
        assert_eq!(granular_count_fast(&a, 0).unwrap().get(21), 1.0);
    }

    #[test]
    fn rejects_out_of_range_degrees() {
        assert!(PossibilityAssignment::from_rows(&[[1.2, 0.0]]).is_err());
        assert!(PossibilityAssignment::from_rows(&[[f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn empty_observation_set() {
        let a = PossibilityAssignment::new(0, 2, vec![]).unwrap();
        assert_eq!(granular_count_fast(&a, 0).unwrap().values(), &[1.0][..]);
        assert_eq!(granular_count_bruteforce(&a, 0).unwrap().values(), &[1.0][..]);
    }
}
