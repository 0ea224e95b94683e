//! Training loop: fresh samples at the current parameters, one SGD step.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::ansatz::{Ansatz, Wavefunction};
use crate::error::{Error, Result};
use crate::groups::{Isometry, SpaceGroup};
use crate::hamiltonian::Hamiltonian;
use crate::metrics::batch_means_stderr;
use crate::rng::{child_rng, stream_seed};
use crate::sampler::{McmcParams, McmcSource, SampleSource};
use crate::smoothing::{FundamentalRegion, SmoothingSpec};
use crate::symmetrize::{gas_subsample, GroupAveraged, SmoothedCanonical};
use crate::update::{
    augmented_terms_from, check_divisible, da_seed, direct_terms_from, Baseline, Method, UpdateEstimate,
};

/// Energy excursion (relative to the first step) treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// `Diverged` when `energy` is not finite or strays from `initial` by more
/// than [`DIVERGENCE_FACTOR`] times `max(|initial|, 1)`.
pub fn check_divergence(initial: f64, energy: f64, step: usize) -> Result<()> {
    if !energy.is_finite() || (energy - initial).abs() > DIVERGENCE_FACTOR * initial.abs().max(1.0) {
        return Err(Error::Diverged { step, energy });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    /// Multiply by `factor` every `every` steps; `every = 0` keeps it fixed.
    pub every: usize,
    pub factor: f64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule { initial: lr, every: 0, factor: 1.0 }
    }

    pub fn at(&self, step: usize) -> f64 {
        match step.checked_div(self.every) {
            Some(k) => self.initial * self.factor.powi(k as i32),
            None => self.initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub method: Method,
    pub steps: usize,
    pub batch: usize,
    /// DA augmentations per sample, GA/GAs subset size.
    pub k: usize,
    pub mcmc: McmcParams,
    pub lr: LrSchedule,
    pub baseline: Baseline,
    pub seed: u64,
    /// Group indices averaged by GA; `None` means the whole group.
    pub ga_subset: Option<Vec<usize>>,
    /// Train the smoothed canonicalization of the ansatz (OG updates only).
    pub canonical: Option<(FundamentalRegion, SmoothingSpec)>,
}

impl TrainSettings {
    pub fn validate(&self, group: &SpaceGroup) -> Result<()> {
        self.mcmc.validate()?;
        if self.batch == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        if !(self.lr.initial > 0.0) || !(self.lr.factor > 0.0) {
            return Err(Error::Invalid("learning rate and decay factor must be positive".into()));
        }
        if let Some((region, spec)) = &self.canonical {
            if self.method != Method::Og {
                return Err(Error::Invalid("smoothed canonicalization trains with OG updates only".into()));
            }
            if !(spec.epsilon < region.inradius()) {
                return Err(Error::EpsilonTooLarge { epsilon: spec.epsilon, inradius: region.inradius() });
            }
        }
        match self.method {
            Method::Og => Ok(()),
            Method::Da | Method::Ga => check_divisible(self.batch, self.k).map(|_| ()),
            Method::Gas => {
                if self.k == 0 || self.k > group.order() {
                    Err(Error::SubsampleSize { k: self.k, order: group.order() })
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub energy: f64,
    pub stderr: f64,
    pub variance: f64,
    pub acceptance: f64,
    pub lr: f64,
    pub node_resamples: usize,
    /// Base wavefunction evaluations spent sampling.
    pub samp_evals: u64,
    /// Base wavefunction evaluations spent on local energies and gradients.
    pub grad_evals: u64,
    /// Seconds in the sampling and gradient phases (0 without a clock).
    pub samp_seconds: f64,
    pub grad_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    h: &'a Hamiltonian,
    group: &'a SpaceGroup,
    ansatz: Ansatz,
    settings: TrainSettings,
    source: McmcSource,
    step: usize,
    initial_energy: Option<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(h: &'a Hamiltonian, group: &'a SpaceGroup, ansatz: Ansatz, settings: TrainSettings) -> Result<Self> {
        settings.validate(group)?;
        if group.lattice() != ansatz.cell().lattice {
            return Err(Error::DimensionMismatch { expected: ansatz.dim(), got: group.dim() });
        }
        let source = McmcSource::new(settings.mcmc, stream_seed(settings.seed, crate::rng::SAMPLER), ansatz.n_up())?;
        Ok(Trainer { h, group, ansatz, settings, source, step: 0, initial_energy: None })
    }

    pub fn ansatz(&self) -> &Ansatz {
        &self.ansatz
    }

    pub fn into_ansatz(self) -> Ansatz {
        self.ansatz
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn settings(&self) -> &TrainSettings {
        &self.settings
    }

    fn averaged_elements(&self) -> Result<Vec<Isometry>> {
        match self.settings.method {
            Method::Ga => match &self.settings.ga_subset {
                Some(ix) => self.group.subset(ix),
                None => Ok(self.group.elements().to_vec()),
            },
            Method::Gas => gas_subsample(
                self.group,
                self.settings.k,
                self.step as u64,
                stream_seed(self.settings.seed, crate::rng::GAS_SUBSAMPLE),
            ),
            _ => Ok(Vec::new()),
        }
    }

    /// One sampling phase and one update; `now` supplies wall-clock seconds.
    pub fn step_with_clock(&mut self, now: &mut dyn FnMut() -> f64) -> Result<StepRecord> {
        let s = &self.settings;
        let method = s.method;
        let (n, k) = (s.batch, s.k);
        let before = self.source.evaluations();
        let t0 = now();
        let (est, cost) = match method {
            Method::Og if s.canonical.is_some() => {
                let (region, spec) = s.canonical.clone().expect("checked");
                let psi = SmoothedCanonical::new(&self.ansatz, self.group.clone(), region, spec)?;
                let samples = self.source.draw(&psi, n)?;
                let t1 = now();
                let terms = direct_terms_from(self.h, &psi, &mut self.source, samples)?;
                (UpdateEstimate::finish(method, terms, 1, s.mcmc.steps_per_draw, s.baseline)?, (t1, 1u64))
            }
            Method::Og | Method::Da => {
                let count = if method == Method::Da { n / k } else { n };
                let samples = self.source.draw(&self.ansatz, count)?;
                let t1 = now();
                let terms = if method == Method::Da {
                    let mut rng = child_rng(da_seed(s.seed, self.step as u64), 0);
                    augmented_terms_from(self.h, &self.ansatz, self.group, &mut self.source, samples, k, &mut rng)?
                } else {
                    direct_terms_from(self.h, &self.ansatz, &mut self.source, samples)?
                };
                let kk = if method == Method::Da { k } else { 1 };
                (UpdateEstimate::finish(method, terms, kk, s.mcmc.steps_per_draw, s.baseline)?, (t1, 1u64))
            }
            Method::Ga | Method::Gas => {
                let elements = self.averaged_elements()?;
                let size = elements.len() as u64;
                let psi = GroupAveraged::new(&self.ansatz, elements)?;
                let count = if method == Method::Ga { n / k } else { n };
                let samples = self.source.draw(&psi, count)?;
                let t1 = now();
                let terms = direct_terms_from(self.h, &psi, &mut self.source, samples)?;
                (UpdateEstimate::finish(method, terms, k, s.mcmc.steps_per_draw, s.baseline)?, (t1, size))
            }
        };
        let t2 = now();
        let (t1, per_eval) = cost;
        let samp_evals = (self.source.evaluations() - before) * per_eval;
        let grad_evals = est.n as u64 * per_eval;

        let energy = est.energy;
        let e0 = *self.initial_energy.get_or_insert(energy);
        check_divergence(e0, energy, self.step)?;
        let lr = self.settings.lr.at(self.step);
        let mut theta = self.ansatz.params();
        for (t, d) in theta.iter_mut().zip(&est.delta_theta) {
            *t -= lr * d;
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged { step: self.step, energy: f64::NAN });
        }
        self.ansatz.set_params(&theta)?;

        let record = StepRecord {
            step: self.step,
            energy,
            stderr: batch_means_stderr(&est.terms.local_energy, crate::metrics::BATCH_BLOCKS),
            variance: est.energy_variance,
            acceptance: self.source.acceptance(),
            lr,
            node_resamples: est.node_resamples,
            samp_evals,
            grad_evals,
            samp_seconds: t1 - t0,
            grad_seconds: t2 - t1,
        };
        self.step += 1;
        Ok(record)
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        self.step_with_clock(&mut || 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub ansatz: Ansatz,
    pub trace: Vec<StepRecord>,
}

pub fn train(h: &Hamiltonian, group: &SpaceGroup, ansatz: Ansatz, settings: TrainSettings) -> Result<TrainResult> {
    let steps = settings.steps;
    let mut t = Trainer::new(h, group, ansatz, settings)?;
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        trace.push(t.step()?);
    }
    Ok(TrainResult { ansatz: t.into_ansatz(), trace })
}
