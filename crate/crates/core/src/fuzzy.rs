//! Beta-type fuzzy counts.
//!
//! The membership of `y ∈ {0, …, K}` in the fuzzy count with location `c` and precision `h`
//! is `exp(−h · KL(Bern(c/K) ‖ Bern(y/K)))`, i.e. the Beta kernel with shapes
//! `(1 + h·c/K, 1 + h·(1 − c/K))` rescaled so that its mode `c/K` has membership 1.

use alloc::vec::Vec;

use libm::{exp, fabs, log};

use crate::error::{invalid, Error, Result};
use crate::possibility::MembershipVector;

/// Default precision assigned to a point (crisp) fuzzy set.
pub const DEFAULT_CRISP_CEILING: f64 = 1e6;

/// Parametric fuzzy count with location `c ∈ [0, K]` and precision `h > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFuzzy {
    c: f64,
    h: f64,
    k_max: usize,
}

/// Bernoulli KL divergence `KL(Bern(m) ‖ Bern(t))` given both probabilities and their
/// complements. Returns `+∞` when `t` excludes mass that `m` carries.
fn bernoulli_kl(m: f64, m_c: f64, t: f64, t_c: f64) -> f64 {
    let side = |p: f64, q: f64| {
        if p == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p * log(p / q)
        }
    };
    (side(m, t) + side(m_c, t_c)).max(0.0)
}

/// Membership on the unit scale: mode `m ∈ [0, 1]`, precision `h`, argument `t ∈ [0, 1]`.
pub fn unit_membership(m: f64, h: f64, t: f64) -> f64 {
    let d = bernoulli_kl(m, 1.0 - m, t, 1.0 - t);
    if d.is_infinite() {
        0.0
    } else {
        exp(-h * d)
    }
}

impl BetaFuzzy {
    pub fn new(c: f64, h: f64, k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(invalid("truncation level K must be at least 1"));
        }
        if !(c.is_finite() && (0.0..=k_max as f64).contains(&c)) {
            return Err(invalid(alloc::format!("location c = {c} outside [0, {k_max}]")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(alloc::format!("precision h = {h} must be positive")));
        }
        Ok(Self { c, h, k_max })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Location on the unit scale, `c / K`.
    pub fn scaled_location(&self) -> f64 {
        self.c / self.k_max as f64
    }

    /// Membership degree `ξ_{c,h}(y)`.
    pub fn membership(&self, y: usize) -> Result<f64> {
        if y > self.k_max {
            return Err(Error::IndexOutOfRange { index: y, len: self.k_max + 1 });
        }
        Ok(self.membership_unchecked(y))
    }

    fn membership_unchecked(&self, y: usize) -> f64 {
        membership_on_grid(self.c, self.h, y, self.k_max)
    }

    /// Membership at a point `t ∈ [0, 1]` of the unit-scaled support.
    pub fn membership_at_unit(&self, t: f64) -> f64 {
        unit_membership(self.scaled_location(), self.h, t)
    }

    /// All memberships on `{0, …, K}`.
    pub fn memberships(&self) -> Vec<f64> {
        (0..=self.k_max).map(|y| self.membership_unchecked(y)).collect()
    }

    pub fn to_membership_vector(&self) -> MembershipVector {
        MembershipVector::new(self.memberships()).expect("memberships lie in [0, 1]")
    }

    /// The α-cut `{y : ξ(y) ≥ α}` as an inclusive interval, or `None` if it is empty.
    pub fn alpha_cut(&self, alpha: f64) -> Result<Option<(usize, usize)>> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(alloc::format!("alpha = {alpha} outside (0, 1]")));
        }
        let xi = self.memberships();
        let lo = xi.iter().position(|&v| v >= alpha);
        let hi = xi.iter().rposition(|&v| v >= alpha);
        Ok(lo.zip(hi))
    }

    /// Centroid of the membership function on the grid.
    pub fn centroid(&self) -> f64 {
        centroid(&self.memberships()).expect("Beta-type fuzzy sets have non-empty support")
    }
}

/// Grid membership using exact integer complements so that `ξ(y) = ξ(K − y)` holds bitwise
/// for `c = K/2`.
fn membership_on_grid(c: f64, h: f64, y: usize, k_max: usize) -> f64 {
    let kf = k_max as f64;
    let m = c / kf;
    let m_c = (kf - c) / kf;
    let t = y as f64 / kf;
    let t_c = (k_max - y) as f64 / kf;
    let d = bernoulli_kl(m, m_c, t, t_c);
    if d.is_infinite() {
        0.0
    } else {
        exp(-h * d)
    }
}

fn centroid(xi: &[f64]) -> Result<f64> {
    let mass: f64 = xi.iter().sum();
    if mass <= 0.0 {
        return Err(Error::EmptyFuzzySet);
    }
    let moment: f64 = xi.iter().enumerate().map(|(y, &v)| y as f64 * v).sum();
    Ok(moment / mass)
}

/// Centroid defuzzification `Σ y·ξ(y) / Σ ξ(y)`.
pub fn defuzzify(mv: &MembershipVector) -> Result<f64> {
    centroid(mv.values())
}

/// Settings for [`fit_beta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop once `|Δc| + |Δ ln h|` falls below this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Precision assigned to point fuzzy sets, and the upper bound of the search.
    pub crisp_ceiling: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 500, crisp_ceiling: DEFAULT_CRISP_CEILING }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: BetaFuzzy,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the input was a point fuzzy set and `h` was pinned to the ceiling.
    pub crisp: bool,
}

fn sse(xi: &[f64], c: f64, h: f64, k_max: usize) -> f64 {
    xi.iter()
        .enumerate()
        .map(|(y, &v)| {
            let r = v - membership_on_grid(c, h, y, k_max);
            r * r
        })
        .sum()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` on `[lo, hi]`; returns the best abscissa found.
fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo) <= 1e-12 * (1.0 + fabs(lo) + fabs(hi)) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section sweeps before switching to Levenberg–Marquardt.
const COORDINATE_SWEEPS: usize = 3;

/// `JᵀJ` (packed as `[a00, a01, a11]`) and `Jᵀr` for the residuals `r_y = ξ(y) − ξ_{c,h}(y)`
/// with respect to `(c, ln h)`. The `c` column is zeroed when `c` is pinned.
fn normal_equations(xi: &[f64], c: f64, h: f64, k_max: usize, pin_c: bool) -> ([f64; 3], [f64; 2]) {
    let kf = k_max as f64;
    let m = (c / kf).clamp(1e-12, 1.0 - 1e-12);
    let mut jtj = [0.0; 3];
    let mut jtr = [0.0; 2];
    for (y, &obs) in xi.iter().enumerate() {
        let fit = membership_on_grid(c, h, y, k_max);
        if fit == 0.0 {
            continue;
        }
        let t = y as f64 / kf;
        let t_c = (k_max - y) as f64 / kf;
        let d = bernoulli_kl(c / kf, (kf - c) / kf, t, t_c);
        let dd_dm = log(m / t) - log((1.0 - m) / t_c);
        let j_c = if pin_c || !dd_dm.is_finite() { 0.0 } else { -h * fit * dd_dm / kf };
        let j_h = -h * d * fit;
        let r = obs - fit;
        jtj[0] += j_c * j_c;
        jtj[1] += j_c * j_h;
        jtj[2] += j_h * j_h;
        jtr[0] += j_c * r;
        jtr[1] += j_h * r;
    }
    if pin_c {
        jtj[0] = 1.0;
    }
    (jtj, jtr)
}

/// Linear interpolation of the point where `xi` crosses 1/2 walking away from `start`.
fn half_height_crossing(xi: &[f64], start: usize, rightwards: bool) -> Option<f64> {
    let mut prev = start;
    loop {
        let next = if rightwards {
            if prev + 1 >= xi.len() {
                return None;
            }
            prev + 1
        } else {
            prev.checked_sub(1)?
        };
        if xi[next] < 0.5 {
            let (a, b) = (xi[prev], xi[next]);
            let frac = (a - 0.5) / (a - b);
            let step = if rightwards { frac } else { -frac };
            return Some(prev as f64 + step);
        }
        prev = next;
    }
}

/// Least-squares fit of a Beta-type fuzzy count to a raw membership vector.
///
/// Starts from the (mean) argmax and the precision implied by the half-height crossings,
/// runs a few alternating golden-section searches over `c` and `ln h`, then polishes with
/// Levenberg–Marquardt steps on `(c, ln h)`; every move is kept only if it strictly lowers
/// the residual sum of squares. A vector that reads the same reversed has a
/// loss symmetric about `K/2`; its location is pinned there and only `h` is searched.
pub fn fit_beta(mv: &MembershipVector, opts: &FitOptions) -> Result<FitResult> {
    let xi = mv.values();
    let k_max = mv.k_max();
    if mv.support_is_empty() {
        return Err(Error::EmptyFuzzySet);
    }
    if !mv.is_normalized() {
        return Err(invalid(alloc::format!("membership vector is not normalized (max = {})", mv.max())));
    }
    if k_max == 0 {
        return Err(invalid("truncation level K must be at least 1"));
    }
    let support = mv.support();
    let kf = k_max as f64;
    if support.len() == 1 {
        let c = support[0] as f64;
        let h = opts.crisp_ceiling;
        let params = BetaFuzzy::new(c, h, k_max)?;
        return Ok(FitResult { params, sse: sse(xi, c, h, k_max), iterations: 0, converged: true, crisp: true });
    }

    let top: Vec<usize> = (0..=k_max).filter(|&y| xi[y] == 1.0).collect();
    let mut c = top.iter().sum::<usize>() as f64 / top.len() as f64;
    let palindrome = (0..=k_max).all(|y| xi[y] == xi[k_max - y]);
    if palindrome {
        c = kf / 2.0;
    }
    let m0 = c / kf;
    let left = half_height_crossing(xi, top[0], false);
    let right = half_height_crossing(xi, *top.last().unwrap(), true);
    let mut widths = Vec::new();
    let mut h_guesses = Vec::new();
    for t_half in [left, right].into_iter().flatten() {
        widths.push(fabs(t_half - c));
        let d = bernoulli_kl(m0, 1.0 - m0, t_half / kf, 1.0 - t_half / kf);
        if d.is_finite() && d > 0.0 {
            h_guesses.push(core::f64::consts::LN_2 / d);
        }
    }
    let h_max = opts.crisp_ceiling;
    let mut h = if h_guesses.is_empty() { 1.0 } else { h_guesses.iter().sum::<f64>() / h_guesses.len() as f64 };
    h = h.clamp(1e-6, h_max);
    let width = widths.iter().copied().fold(1.0, f64::max);
    let c_radius = (2.0 * width).min(kf);

    let mut loss = sse(xi, c, h, k_max);
    let mut converged = false;
    let mut iterations = 0;
    let log_h_bounds = (log(1e-6), log(h_max));
    while iterations < opts.max_iter.min(COORDINATE_SWEEPS) {
        iterations += 1;
        let (c_old, h_old) = (c, h);

        if !palindrome {
            let lo = (c - c_radius).max(0.0);
            let hi = (c + c_radius).min(kf);
            let (c_new, l_new) = golden_section(lo, hi, |cc| sse(xi, cc, h, k_max));
            if l_new < loss {
                c = c_new;
                loss = l_new;
            }
        }

        let lh = log(h);
        let lo = (lh - 3.0).max(log_h_bounds.0);
        let hi = (lh + 3.0).min(log_h_bounds.1);
        let (lh_new, l_new) = golden_section(lo, hi, |v| sse(xi, c, exp(v), k_max));
        if l_new < loss {
            h = exp(lh_new);
            loss = l_new;
        }

        if fabs(c - c_old) + fabs(log(h) - log(h_old)) < opts.tolerance {
            converged = true;
            break;
        }
    }

    // Levenberg–Marquardt on (c, ln h) from the coordinate-search estimate.
    let mut damping = 1e-3;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let (jtj, jtr) = normal_equations(xi, c, h, k_max, palindrome);
        let a00 = jtj[0] * (1.0 + damping);
        let a11 = jtj[2] * (1.0 + damping);
        let det = a00 * a11 - jtj[1] * jtj[1];
        if !(det.is_finite() && det > 0.0) {
            damping *= 10.0;
            if damping > 1e12 {
                converged = true;
            }
            continue;
        }
        let dc = (a11 * jtr[0] - jtj[1] * jtr[1]) / det;
        let dlh = (a00 * jtr[1] - jtj[1] * jtr[0]) / det;
        let c_new = (c + dc).clamp(0.0, kf);
        let lh_new = (log(h) + dlh).clamp(log_h_bounds.0, log_h_bounds.1);
        let step = fabs(c_new - c) + fabs(lh_new - log(h));
        let l_new = sse(xi, c_new, exp(lh_new), k_max);
        if l_new < loss {
            c = c_new;
            h = exp(lh_new);
            loss = l_new;
            damping = (damping / 10.0).max(1e-12);
            if step < opts.tolerance {
                converged = true;
            }
        } else {
            if step < opts.tolerance {
                // no descent left at the resolution asked for
                converged = true;
            }
            damping *= 10.0;
            if damping > 1e12 {
                converged = true;
            }
        }
    }
    let params = BetaFuzzy::new(c, h, k_max)?;
    Ok(FitResult { params, sse: loss, iterations, converged, crisp: false })
}
