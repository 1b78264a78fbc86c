use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp, log, pow, sqrt};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{HmcConfig, LogDensity};
use crate::error::{invalid, Error, Result};
use crate::stream_rng;

/// Energy error beyond which a trajectory counts as divergent.
const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LeapfrogOutput {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
    /// Set when the trajectory left the region where the density is finite.
    pub divergent: bool,
}

/// `n_steps` leapfrog steps of size `step` for the Hamiltonian
/// `−log π(q) + ½ pᵀ diag(inv_mass) p`.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    position: &[f64],
    momentum: &[f64],
    inv_mass: &[f64],
    step: f64,
    n_steps: usize,
) -> LeapfrogOutput {
    let mut grad = vec![0.0; position.len()];
    let lp = target.log_density_and_grad(position, &mut grad);
    let mut q = position.to_vec();
    let mut p = momentum.to_vec();
    let (lp, divergent) = integrate(target, &mut q, &mut p, &mut grad, lp, inv_mass, step, n_steps);
    LeapfrogOutput { position: q, momentum: p, log_density: lp, grad, divergent }
}

/// In-place leapfrog integration; `grad` must hold the gradient at `q` on entry.
#[allow(clippy::too_many_arguments)]
fn integrate<T: LogDensity + ?Sized>(
    target: &T,
    q: &mut [f64],
    p: &mut [f64],
    grad: &mut [f64],
    mut lp: f64,
    inv_mass: &[f64],
    step: f64,
    n_steps: usize,
) -> (f64, bool) {
    if !lp.is_finite() {
        return (lp, true);
    }
    for _ in 0..n_steps {
        for (pi, gi) in p.iter_mut().zip(grad.iter()) {
            *pi += 0.5 * step * gi;
        }
        for ((qi, pi), mi) in q.iter_mut().zip(p.iter()).zip(inv_mass) {
            *qi += step * mi * pi;
        }
        lp = target.log_density_and_grad(q, grad);
        if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return (lp, true);
        }
        for (pi, gi) in p.iter_mut().zip(grad.iter()) {
            *pi += 0.5 * step * gi;
        }
    }
    (lp, false)
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(pi, mi)| pi * pi * mi).sum::<f64>()
}

fn draw_momentum<R: Rng + ?Sized>(inv_mass: &[f64], rng: &mut R) -> Vec<f64> {
    inv_mass.iter().map(|m| rng.sample::<f64, _>(StandardNormal) / sqrt(*m)).collect()
}

/// Current state of a chain.
struct State {
    q: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
}

struct Transition {
    accept_stat: f64,
    divergent: bool,
    energy: f64,
    n_steps: usize,
}

fn transition<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    state: &mut State,
    inv_mass: &[f64],
    step: f64,
    n_steps: usize,
    rng: &mut R,
) -> Transition {
    let p0 = draw_momentum(inv_mass, rng);
    let h0 = -state.lp + kinetic(&p0, inv_mass);
    let mut q = state.q.clone();
    let mut p = p0;
    let mut grad = state.grad.clone();
    let (lp, mut divergent) = integrate(target, &mut q, &mut p, &mut grad, state.lp, inv_mass, step, n_steps);
    let h1 = -lp + kinetic(&p, inv_mass);
    if !h1.is_finite() || h1 - h0 > MAX_ENERGY_ERROR {
        divergent = true;
    }
    let accept_stat = if divergent { 0.0 } else { exp(h0 - h1).min(1.0) };
    let u: f64 = rng.random();
    if !divergent && u < accept_stat {
        *state = State { q, grad, lp };
        Transition { accept_stat, divergent, energy: h1, n_steps }
    } else {
        Transition { accept_stat, divergent, energy: h0, n_steps }
    }
}

/// Doubles or halves a unit step until a single leapfrog step crosses acceptance 1/2.
pub fn find_reasonable_step_size<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    position: &[f64],
    inv_mass: &[f64],
    rng: &mut R,
) -> f64 {
    let mut grad = vec![0.0; position.len()];
    let lp0 = target.log_density_and_grad(position, &mut grad);
    let p0 = draw_momentum(inv_mass, rng);
    let h0 = -lp0 + kinetic(&p0, inv_mass);
    let log_accept = |step: f64| {
        let mut q = position.to_vec();
        let mut p = p0.clone();
        let mut g = grad.clone();
        let (lp, div) = integrate(target, &mut q, &mut p, &mut g, lp0, inv_mass, step, 1);
        let h = -lp + kinetic(&p, inv_mass);
        if div || !h.is_finite() {
            f64::NEG_INFINITY
        } else {
            h0 - h
        }
    };
    let mut step = 1.0;
    let first = log_accept(step);
    let direction = if first > log(0.5) { 1.0 } else { -1.0 };
    for _ in 0..100 {
        let la = log_accept(step);
        if direction * la <= direction * log(0.5) {
            break;
        }
        step *= pow(2.0, direction);
    }
    step
}

/// Regularization of the last warmup window. It is larger than the usual 0.05 so that the step
/// iterates fluctuate less; the averaged step then realizes the target acceptance instead of
/// overshooting it.
const FINAL_GAMMA: f64 = 0.15;

/// Nesterov dual averaging of `ln ε`.
struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_step: f64,
    log_step_bar: f64,
    iteration: f64,
    gamma: f64,
}

impl DualAveraging {
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(step: f64, target: f64, gamma: f64) -> Self {
        Self { mu: log(10.0 * step), target, h_bar: 0.0, log_step: log(step), log_step_bar: 0.0, iteration: 0.0, gamma }
    }

    fn update(&mut self, accept_stat: f64) {
        self.iteration += 1.0;
        let m = self.iteration;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat);
        self.log_step = self.mu - sqrt(m) / self.gamma * self.h_bar;
        let eta = pow(m, -Self::KAPPA);
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar;
    }

    fn current(&self) -> f64 {
        exp(self.log_step)
    }

    fn adapted(&self) -> f64 {
        if self.iteration == 0.0 {
            self.current()
        } else {
            exp(self.log_step_bar)
        }
    }
}

/// Output of one chain; positions are on the unconstrained scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub chain: usize,
    pub positions: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub divergent: Vec<bool>,
    pub accept_stat: Vec<f64>,
    pub n_leapfrog: Vec<usize>,
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
    pub warmup_divergences: usize,
}

fn n_steps_for<R: Rng + ?Sized>(config: &HmcConfig, step: f64, rng: &mut R) -> usize {
    let max_steps = (ceil(config.path_length / step) as usize).clamp(1, config.max_leapfrog);
    rng.random_range(1..=max_steps)
}

/// Runs chain `chain` of `config`, starting from `center` plus Gaussian jitter.
///
/// The random stream is `(config.seed, chain)`, so a chain's output does not depend on how
/// many other chains exist or where they run.
pub fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    config: &HmcConfig,
    chain: usize,
    center: &[f64],
) -> Result<ChainDraws> {
    config.validate()?;
    let dim = target.dim();
    if dim == 0 || center.len() != dim {
        return Err(Error::LengthMismatch { expected: dim, got: center.len() });
    }
    let mut rng = stream_rng(config.seed, chain as u64);

    let mut state = None;
    for _ in 0..100 {
        let q: Vec<f64> =
            center.iter().map(|c| c + config.init_jitter * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut grad = vec![0.0; dim];
        let lp = target.log_density_and_grad(&q, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            state = Some(State { q, grad, lp });
            break;
        }
    }
    let mut state = state
        .ok_or_else(|| invalid(alloc::format!("chain {chain}: log density is not finite near the initial point")))?;

    let mut inv_mass = vec![1.0; dim];
    let mut step = find_reasonable_step_size(target, &state.q, &inv_mass, &mut rng);
    let mut adapt = DualAveraging::new(step, config.target_accept, 0.05);

    let w = config.n_warmup;
    let metric_start = w / 2;
    let metric_end = w - (w / 5);
    let (mut count, mut mean, mut m2) = (0usize, vec![0.0; dim], vec![0.0; dim]);
    let mut warmup_divergences = 0;
    for it in 0..w {
        let n = n_steps_for(config, step, &mut rng);
        let t = transition(target, &mut state, &inv_mass, step, n, &mut rng);
        warmup_divergences += usize::from(t.divergent);
        adapt.update(t.accept_stat);
        step = adapt.current();
        if (metric_start..metric_end).contains(&it) {
            count += 1;
            for j in 0..dim {
                let delta = state.q[j] - mean[j];
                mean[j] += delta / count as f64;
                m2[j] += delta * (state.q[j] - mean[j]);
            }
        }
        if it + 1 == metric_end && count >= 10 {
            let nf = count as f64;
            for j in 0..dim {
                let var = m2[j] / (nf - 1.0);
                inv_mass[j] = (nf / (nf + 5.0)) * var + 1e-3 * (5.0 / (nf + 5.0));
            }
            step = find_reasonable_step_size(target, &state.q, &inv_mass, &mut rng);
            adapt = DualAveraging::new(step, config.target_accept, FINAL_GAMMA);
        }
    }
    if w > 0 && warmup_divergences == w {
        return Err(Error::AllDivergent { chain });
    }
    if w > 0 {
        step = adapt.adapted();
    }

    let mut out = ChainDraws {
        chain,
        positions: Vec::with_capacity(config.n_draws),
        energy: Vec::with_capacity(config.n_draws),
        divergent: Vec::with_capacity(config.n_draws),
        accept_stat: Vec::with_capacity(config.n_draws),
        n_leapfrog: Vec::with_capacity(config.n_draws),
        step_size: step,
        inv_mass: inv_mass.clone(),
        warmup_divergences,
    };
    for _ in 0..config.n_draws {
        let n = n_steps_for(config, step, &mut rng);
        let t = transition(target, &mut state, &inv_mass, step, n, &mut rng);
        out.positions.push(state.q.clone());
        out.energy.push(t.energy);
        out.divergent.push(t.divergent);
        out.accept_stat.push(t.accept_stat);
        out.n_leapfrog.push(t.n_steps);
    }
    Ok(out)
}

/// Runs every chain sequentially, in chain order.
pub fn sample<T: LogDensity + ?Sized>(target: &T, config: &HmcConfig, center: &[f64]) -> Result<Vec<ChainDraws>> {
    (0..config.n_chains).map(|c| run_chain(target, config, c, center)).collect()
}
