//! First-order parameter updates: OG, DA, GA and subsampled GA.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{Ansatz, Wavefunction};
use crate::error::{Error, Result};
use crate::groups::{Configuration, Isometry, SpaceGroup};
use crate::hamiltonian::{local_energy_from_eval, Hamiltonian};
use crate::metrics::{mean, variance};
use crate::rng::{child_rng, stream_seed};
use crate::sampler::SampleSource;
use crate::symmetrize::{da_transform, gas_subsample, GroupAveraged};

/// Node redraws allowed per sample before giving up.
pub const NODE_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Og,
    Da,
    Ga,
    Gas,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Og, Method::Da, Method::Ga, Method::Gas];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Og => "OG",
            Method::Da => "DA",
            Method::Ga => "GA",
            Method::Gas => "GAs",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Mean local energy of the terms entering the update.
    BatchMean,
    Fixed(f64),
}

/// `F = 2 (E_local - b) d/dtheta log|psi|`.
pub fn grad_estimator_f<W: Wavefunction + ?Sized>(h: &Hamiltonian, psi: &W, c: &Configuration, baseline: f64) -> Result<Vec<f64>> {
    let e = psi.evaluate(c)?;
    let el = local_energy_from_eval(h, &e, c)?;
    Ok(e.grad_params.iter().map(|g| 2.0 * (el - baseline) * g).collect())
}

/// Per-term ingredients of an update, in summation order.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateTerms {
    pub local_energy: Vec<f64>,
    pub grad_log: Vec<Vec<f64>>,
    /// Terms `k*i .. k*(i+1)` share the same base sample.
    pub group_size: usize,
    pub node_resamples: usize,
}

impl UpdateTerms {
    fn new(group_size: usize) -> Self {
        UpdateTerms { local_energy: Vec::new(), grad_log: Vec::new(), group_size, node_resamples: 0 }
    }

    pub fn len(&self) -> usize {
        self.local_energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_energy.is_empty()
    }

    pub fn baseline_value(&self, b: Baseline) -> f64 {
        match b {
            Baseline::BatchMean => mean(&self.local_energy),
            Baseline::Fixed(v) => v,
        }
    }

    /// `F` for every term.
    pub fn f_terms(&self, b: Baseline) -> Vec<Vec<f64>> {
        let b = self.baseline_value(b);
        self.local_energy
            .iter()
            .zip(&self.grad_log)
            .map(|(e, g)| g.iter().map(|x| 2.0 * (e - b) * x).collect())
            .collect()
    }

    pub fn mean_f(&self, b: Baseline) -> Vec<f64> {
        let f = self.f_terms(b);
        let q = self.grad_log.first().map_or(0, |g| g.len());
        let mut out = vec![0.0; q];
        for t in &f {
            for (o, x) in out.iter_mut().zip(t) {
                *o += x;
            }
        }
        let n = f.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateEstimate {
    pub delta_theta: Vec<f64>,
    pub method: Method,
    /// Total number of `F` terms.
    pub n: usize,
    pub k: usize,
    /// Markov steps per draw (0 for exact sampling).
    pub m: usize,
    pub energy: f64,
    pub energy_variance: f64,
    pub node_resamples: usize,
    pub terms: UpdateTerms,
}

impl UpdateEstimate {
    pub fn finish(method: Method, terms: UpdateTerms, k: usize, m: usize, b: Baseline) -> Result<Self> {
        let delta_theta = terms.mean_f(b);
        if delta_theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { step: 0, energy: f64::NAN });
        }
        Ok(UpdateEstimate {
            n: terms.len(),
            energy: mean(&terms.local_energy),
            energy_variance: variance(&terms.local_energy),
            node_resamples: terms.node_resamples,
            delta_theta,
            method,
            k,
            m,
            terms,
        })
    }
}

pub fn check_divisible(n: usize, k: usize) -> Result<usize> {
    if k == 0 || n == 0 || !n.is_multiple_of(k) {
        return Err(Error::Divisibility { n, k });
    }
    Ok(n / k)
}

/// `(E_local, d log|psi|)` at `c`, `None` at a node.
pub fn local_term<W: Wavefunction + ?Sized>(h: &Hamiltonian, psi: &W, c: &Configuration) -> Result<Option<(f64, Vec<f64>)>> {
    let e = psi.evaluate(c)?;
    match local_energy_from_eval(h, &e, c) {
        Ok(el) => Ok(Some((el, e.grad_params))),
        Err(Error::Node) => Ok(None),
        Err(err) => Err(err),
    }
}

/// One term per sample of `psi`, redrawing samples that hit a node.
pub fn direct_terms(h: &Hamiltonian, psi: &dyn Wavefunction, source: &mut dyn SampleSource, count: usize) -> Result<UpdateTerms> {
    let samples = source.draw(psi, count)?;
    direct_terms_from(h, psi, source, samples)
}

/// As [`direct_terms`] on an existing draw from `source`.
pub fn direct_terms_from(
    h: &Hamiltonian,
    psi: &dyn Wavefunction,
    source: &mut dyn SampleSource,
    samples: Vec<Configuration>,
) -> Result<UpdateTerms> {
    let mut out = UpdateTerms::new(1);
    for (i, mut c) in samples.into_iter().enumerate() {
        let mut tries = 0;
        loop {
            if let Some((el, g)) = local_term(h, psi, &c)? {
                out.local_energy.push(el);
                out.grad_log.push(g);
                break;
            }
            tries += 1;
            out.node_resamples += 1;
            if tries > NODE_RETRIES {
                return Err(Error::ResampleBudget(NODE_RETRIES));
            }
            c = source.redraw(psi, i)?;
        }
    }
    Ok(out)
}

/// `k` augmented terms per base sample, group elements drawn from `rng`.
pub fn augmented_terms(
    h: &Hamiltonian,
    base: &dyn Wavefunction,
    group: &SpaceGroup,
    source: &mut dyn SampleSource,
    count: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateTerms> {
    let samples = source.draw(base, count)?;
    augmented_terms_from(h, base, group, source, samples, k, rng)
}

/// As [`augmented_terms`] on an existing draw from `source`.
pub fn augmented_terms_from(
    h: &Hamiltonian,
    base: &dyn Wavefunction,
    group: &SpaceGroup,
    source: &mut dyn SampleSource,
    samples: Vec<Configuration>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateTerms> {
    let mut out = UpdateTerms::new(k);
    for (i, mut c) in samples.into_iter().enumerate() {
        let mut tries = 0;
        'sample: loop {
            let mut block = Vec::with_capacity(k);
            for _ in 0..k {
                let gc = da_transform(group, &c, rng)?;
                match local_term(h, base, &gc)? {
                    Some(t) => block.push(t),
                    None => {
                        tries += 1;
                        out.node_resamples += 1;
                        if tries > NODE_RETRIES {
                            return Err(Error::ResampleBudget(NODE_RETRIES));
                        }
                        c = source.redraw(base, i)?;
                        continue 'sample;
                    }
                }
            }
            for (el, g) in block {
                out.local_energy.push(el);
                out.grad_log.push(g);
            }
            break;
        }
    }
    Ok(out)
}

/// Seed of the DA draw stream at a training step.
pub fn da_seed(seed: u64, step: u64) -> u64 {
    crate::rng::child_seed(stream_seed(seed, crate::rng::DA_DRAWS), step)
}

pub fn update_og(
    h: &Hamiltonian,
    base: &Ansatz,
    source: &mut dyn SampleSource,
    n: usize,
    m: usize,
    baseline: Baseline,
) -> Result<UpdateEstimate> {
    let terms = direct_terms(h, base, source, n)?;
    UpdateEstimate::finish(Method::Og, terms, 1, m, baseline)
}

/// `n/k` base samples, each augmented by `k` uniform group draws.
#[allow(clippy::too_many_arguments)]
pub fn update_da(
    h: &Hamiltonian,
    base: &Ansatz,
    group: &SpaceGroup,
    source: &mut dyn SampleSource,
    n: usize,
    k: usize,
    m: usize,
    baseline: Baseline,
    draw_seed: u64,
) -> Result<UpdateEstimate> {
    let count = check_divisible(n, k)?;
    let mut rng = child_rng(draw_seed, 0);
    let terms = augmented_terms(h, base, group, source, count, k, &mut rng)?;
    UpdateEstimate::finish(Method::Da, terms, k, m, baseline)
}

/// `n/k` samples of the average over `elements`, `F` taken on the average.
#[allow(clippy::too_many_arguments)]
pub fn update_ga(
    h: &Hamiltonian,
    base: &Ansatz,
    elements: &[Isometry],
    source: &mut dyn SampleSource,
    n: usize,
    k: usize,
    m: usize,
    baseline: Baseline,
) -> Result<UpdateEstimate> {
    let count = check_divisible(n, k)?;
    let psi = GroupAveraged::new(base, elements.to_vec())?;
    let terms = direct_terms(h, &psi, source, count)?;
    UpdateEstimate::finish(Method::Ga, terms, k, m, baseline)
}

/// `n` samples of the average over a fresh size-`k` subset drawn for `step`.
#[allow(clippy::too_many_arguments)]
pub fn update_gas(
    h: &Hamiltonian,
    base: &Ansatz,
    group: &SpaceGroup,
    source: &mut dyn SampleSource,
    n: usize,
    k: usize,
    m: usize,
    baseline: Baseline,
    step: u64,
    seed: u64,
) -> Result<UpdateEstimate> {
    let subset = gas_subsample(group, k, step, stream_seed(seed, crate::rng::GAS_SUBSAMPLE))?;
    let psi = GroupAveraged::new(base, subset)?;
    let terms = direct_terms(h, &psi, source, n)?;
    UpdateEstimate::finish(Method::Gas, terms, k, m, baseline)
}
