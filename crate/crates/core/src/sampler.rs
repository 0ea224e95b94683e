//! Metropolis sampling of `|psi|^2` and exact rejection sampling.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use num_traits::Float;

use crate::ansatz::Wavefunction;
use crate::error::{Error, Result};
use crate::groups::Configuration;
use crate::lattice::wrap;
use crate::rng::{child_rng, child_seed};

/// Extra Metropolis steps allowed to walk a chain off a node.
pub const RESAMPLE_BUDGET: usize = 10_000;

/// Uniform positions with the first `n_up` electrons spin up.
pub fn random_configuration<R: Rng + ?Sized>(rng: &mut R, dim: usize, n_up: usize, n_down: usize) -> Configuration {
    let n = n_up + n_down;
    let pos = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    Configuration::with_counts(dim, pos, n_up).expect("consistent sizes")
}

/// One Markov chain: position, cached `log|psi|^2`, private RNG, counters.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub config: Configuration,
    pub log_prob: f64,
    rng: ChaCha8Rng,
    pub accepted: u64,
    pub proposed: u64,
}

impl ChainState {
    pub fn new<W: Wavefunction + ?Sized>(psi: &W, config: Configuration, rng: ChaCha8Rng) -> Result<Self> {
        let log_prob = log_prob(psi, &config)?;
        Ok(ChainState { config, log_prob, rng, accepted: 0, proposed: 0 })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 1.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// Recomputes the cached density after the wavefunction changed.
    pub fn refresh<W: Wavefunction + ?Sized>(&mut self, psi: &W) -> Result<()> {
        self.log_prob = log_prob(psi, &self.config)?;
        Ok(())
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// `log|psi|^2`, `-inf` at nodes.
pub fn log_prob<W: Wavefunction + ?Sized>(psi: &W, c: &Configuration) -> Result<f64> {
    let (l, s) = psi.value(c)?;
    Ok(if s == 0.0 { f64::NEG_INFINITY } else { 2.0 * l })
}

/// Gaussian all-electron move with minimum-image wrap; returns acceptance.
pub fn metropolis_step<W: Wavefunction + ?Sized>(psi: &W, state: &mut ChainState, step_size: f64) -> Result<bool> {
    let mut proposal = state.config.clone();
    for x in proposal.positions_mut() {
        let z: f64 = StandardNormal.sample(&mut state.rng);
        *x = wrap(*x + step_size * z);
    }
    let lp = log_prob(psi, &proposal)?;
    state.proposed += 1;
    let u: f64 = state.rng.random();
    let accept = lp > f64::NEG_INFINITY && (lp - state.log_prob >= 0.0 || u.ln() < lp - state.log_prob);
    if accept {
        state.config = proposal;
        state.log_prob = lp;
        state.accepted += 1;
    }
    Ok(accept)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcParams {
    pub step_size: f64,
    pub burn_in: usize,
    /// Steps between harvested configurations (`m`).
    pub steps_per_draw: usize,
}

impl McmcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::Invalid(alloc::format!("step size must be positive, got {}", self.step_size)));
        }
        Ok(())
    }
}

/// Independent chains seeded by `(seed, chain index)`, one configuration
/// harvested from each after `burn_in + m` steps.
pub fn sample_batch<W: Wavefunction + ?Sized>(
    psi: &W,
    n_chains: usize,
    m: usize,
    burn_in: usize,
    step_size: f64,
    seed: u64,
    n_up: usize,
) -> Result<(Vec<Configuration>, f64)> {
    let mut out = Vec::with_capacity(n_chains);
    let (mut acc, mut prop) = (0u64, 0u64);
    let n_down = psi.n_electrons() - n_up;
    for chain in 0..n_chains {
        let mut rng = child_rng(seed, chain as u64);
        let init = random_configuration(&mut rng, psi.dim(), n_up, n_down);
        let mut state = ChainState::new(psi, init, rng)?;
        for _ in 0..burn_in + m {
            metropolis_step(psi, &mut state, step_size)?;
        }
        acc += state.accepted;
        prop += state.proposed;
        out.push(state.config);
    }
    Ok((out, if prop == 0 { 1.0 } else { acc as f64 / prop as f64 }))
}

/// Thinned series from long chains: `per_chain` samples every `thin` steps
/// after `burn_in`.
pub fn sample_series<W: Wavefunction + ?Sized>(
    psi: &W,
    n_chains: usize,
    per_chain: usize,
    thin: usize,
    burn_in: usize,
    step_size: f64,
    seed: u64,
    n_up: usize,
) -> Result<(Vec<Configuration>, f64)> {
    let mut out = Vec::with_capacity(n_chains * per_chain);
    let (mut acc, mut prop) = (0u64, 0u64);
    let n_down = psi.n_electrons() - n_up;
    for chain in 0..n_chains {
        let mut rng = child_rng(seed, chain as u64);
        let init = random_configuration(&mut rng, psi.dim(), n_up, n_down);
        let mut state = ChainState::new(psi, init, rng)?;
        for _ in 0..burn_in {
            metropolis_step(psi, &mut state, step_size)?;
        }
        for _ in 0..per_chain {
            for _ in 0..thin.max(1) {
                metropolis_step(psi, &mut state, step_size)?;
            }
            out.push(state.config.clone());
        }
        acc += state.accepted;
        prop += state.proposed;
    }
    Ok((out, if prop == 0 { 1.0 } else { acc as f64 / prop as f64 }))
}

/// Where an update gets its configurations from.
pub trait SampleSource {
    /// `count` configurations distributed as `|psi|^2`.
    fn draw(&mut self, psi: &dyn Wavefunction, count: usize) -> Result<Vec<Configuration>>;
    /// Replacement for the `index`-th configuration of the last draw, which
    /// turned out to be unusable (a node).
    fn redraw(&mut self, psi: &dyn Wavefunction, index: usize) -> Result<Configuration>;
    /// Acceptance rate of the last draw (1 for exact sources).
    fn acceptance(&self) -> f64;
    /// Wavefunction values computed so far.
    fn evaluations(&self) -> u64;
    /// Proposals that exceeded an assumed density bound.
    fn bound_violations(&self) -> u64 {
        0
    }
}

/// Persistent walkers advanced `m` steps per draw.
#[derive(Debug, Clone)]
pub struct McmcSource {
    params: McmcParams,
    seed: u64,
    n_up: usize,
    walkers: Vec<ChainState>,
    last_acceptance: f64,
    evaluations: u64,
}

impl McmcSource {
    pub fn new(params: McmcParams, seed: u64, n_up: usize) -> Result<Self> {
        params.validate()?;
        Ok(McmcSource { params, seed, n_up, walkers: Vec::new(), last_acceptance: 1.0, evaluations: 0 })
    }

    pub fn walkers(&self) -> &[ChainState] {
        &self.walkers
    }

    fn spawn(&mut self, psi: &dyn Wavefunction) -> Result<()> {
        let index = self.walkers.len() as u64;
        let mut rng = child_rng(self.seed, index);
        let n_down = psi.n_electrons() - self.n_up;
        let init = random_configuration(&mut rng, psi.dim(), self.n_up, n_down);
        let mut state = ChainState::new(psi, init, rng)?;
        self.evaluations += 1;
        for _ in 0..self.params.burn_in {
            metropolis_step(psi, &mut state, self.params.step_size)?;
        }
        self.evaluations += self.params.burn_in as u64;
        self.walkers.push(state);
        Ok(())
    }
}

impl SampleSource for McmcSource {
    fn draw(&mut self, psi: &dyn Wavefunction, count: usize) -> Result<Vec<Configuration>> {
        while self.walkers.len() < count {
            self.spawn(psi)?;
        }
        let (mut acc, mut prop) = (0u64, 0u64);
        let mut out = Vec::with_capacity(count);
        let step = self.params.step_size;
        for w in self.walkers.iter_mut().take(count) {
            w.refresh(psi)?;
            w.reset_counters();
            for _ in 0..self.params.steps_per_draw {
                metropolis_step(psi, w, step)?;
            }
            acc += w.accepted;
            prop += w.proposed;
            out.push(w.config.clone());
        }
        self.evaluations += (count * (1 + self.params.steps_per_draw)) as u64;
        self.last_acceptance = if prop == 0 { 1.0 } else { acc as f64 / prop as f64 };
        Ok(out)
    }

    fn redraw(&mut self, psi: &dyn Wavefunction, index: usize) -> Result<Configuration> {
        let step = self.params.step_size;
        let w = self.walkers.get_mut(index).ok_or(Error::Invalid("redraw of an unknown walker".into()))?;
        w.refresh(psi)?;
        for _ in 0..RESAMPLE_BUDGET {
            metropolis_step(psi, w, step)?;
            self.evaluations += 1;
            if w.log_prob > f64::NEG_INFINITY && psi.value(&w.config)?.1 != 0.0 {
                return Ok(w.config.clone());
            }
        }
        Err(Error::ResampleBudget(RESAMPLE_BUDGET))
    }

    fn acceptance(&self) -> f64 {
        self.last_acceptance
    }

    fn evaluations(&self) -> u64 {
        self.evaluations
    }
}

/// Rejection sampling from uniform proposals under `log|psi|^2 <= log_bound`.
#[derive(Debug, Clone)]
pub struct ExactSource {
    log_bound: f64,
    seed: u64,
    draws: u64,
    n_up: usize,
    evaluations: u64,
    /// Proposals whose density exceeded the bound (should stay 0).
    pub bound_violations: u64,
}

impl ExactSource {
    pub fn new(log_bound: f64, seed: u64, n_up: usize) -> Self {
        ExactSource { log_bound, seed, draws: 0, n_up, evaluations: 0, bound_violations: 0 }
    }

    /// Bound from a search over random points plus a safety margin.
    pub fn with_estimated_bound<W: Wavefunction + ?Sized>(
        psi: &W,
        probes: usize,
        margin: f64,
        seed: u64,
        n_up: usize,
    ) -> Result<Self> {
        let mut rng = child_rng(seed, u64::MAX);
        let n_down = psi.n_electrons() - n_up;
        let mut best = f64::NEG_INFINITY;
        for _ in 0..probes {
            let c = random_configuration(&mut rng, psi.dim(), n_up, n_down);
            best = best.max(log_prob(psi, &c)?);
        }
        Ok(ExactSource::new(best + margin, seed, n_up))
    }

    pub fn log_bound(&self) -> f64 {
        self.log_bound
    }

    fn one(&mut self, psi: &dyn Wavefunction) -> Result<Configuration> {
        let mut rng = child_rng(self.seed, self.draws);
        self.draws += 1;
        let n_down = psi.n_electrons() - self.n_up;
        loop {
            let c = random_configuration(&mut rng, psi.dim(), self.n_up, n_down);
            let lp = log_prob(psi, &c)?;
            self.evaluations += 1;
            if lp > self.log_bound {
                self.bound_violations += 1;
            }
            let u: f64 = rng.random();
            if lp > f64::NEG_INFINITY && u.ln() < lp - self.log_bound {
                return Ok(c);
            }
        }
    }
}

impl SampleSource for ExactSource {
    fn draw(&mut self, psi: &dyn Wavefunction, count: usize) -> Result<Vec<Configuration>> {
        (0..count).map(|_| self.one(psi)).collect()
    }

    fn redraw(&mut self, psi: &dyn Wavefunction, _index: usize) -> Result<Configuration> {
        self.one(psi)
    }

    fn acceptance(&self) -> f64 {
        1.0
    }

    fn evaluations(&self) -> u64 {
        self.evaluations
    }

    fn bound_violations(&self) -> u64 {
        self.bound_violations
    }
}

/// Seed of the sampler stream for training step `step`.
pub fn step_seed(seed: u64, step: u64) -> u64 {
    child_seed(seed, step)
}
