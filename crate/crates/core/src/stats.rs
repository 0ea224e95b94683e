//! Replicate statistics of parameter updates: variance norms, the
//! invariant-case identities for DA and GA, normality of the updates and the
//! smoothing blowup probe.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::Ratio;
use num_traits::Zero;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ansatz::{Ansatz, Wavefunction};
use crate::error::{Error, Result};
use crate::groups::{apply_diagonal, Configuration, Isometry, SpaceGroup};
use crate::hamiltonian::{local_energy, Hamiltonian};
use crate::metrics::mean;
use crate::rng::{child_rng, child_seed, stream_seed, BOOTSTRAP, NESTED, REPLICATES};
use crate::sampler::{log_prob, ExactSource, McmcParams, McmcSource, SampleSource};
use crate::smoothing::{boundary_set, lambda_eps_derivs, FundamentalRegion, SmoothingSpec, StepKind};
use crate::symmetrize::{GroupAveraged, SmoothedCanonical};
use crate::update::{
    da_seed, local_term, update_da, update_ga, update_gas, update_og, Baseline, Method, UpdateEstimate,
};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const SIGMA_LEVEL: f64 = 3.0;
/// Points on `[0, eps]` scanned by [`lambda_maxima`].
pub const LAMBDA_GRID: usize = 10_000;

/// Replicate mean, unbiased covariance (row-major) and the standard error of
/// every covariance entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub q: usize,
    pub count: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub cov_se: Vec<f64>,
}

pub fn moments(samples: &[Vec<f64>]) -> Result<Moments> {
    let r = samples.len();
    if r < 2 {
        return Err(Error::TooFewSamples { got: r, need: 2 });
    }
    let q = samples[0].len();
    let mut mu = vec![0.0; q];
    for s in samples {
        for (m, x) in mu.iter_mut().zip(s) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= r as f64);
    let mut cov = vec![0.0; q * q];
    let mut m4 = vec![0.0; q * q];
    for s in samples {
        for i in 0..q {
            let a = s[i] - mu[i];
            for j in i..q {
                let b = s[j] - mu[j];
                cov[i * q + j] += a * b;
                m4[i * q + j] += a * a * b * b;
            }
        }
    }
    let mut cov_se = vec![0.0; q * q];
    for i in 0..q {
        for j in i..q {
            let c = cov[i * q + j] / (r - 1) as f64;
            let v = (m4[i * q + j] / r as f64 - c * c).max(0.0) / r as f64;
            cov[i * q + j] = c;
            cov[j * q + i] = c;
            cov_se[i * q + j] = v.sqrt();
            cov_se[j * q + i] = v.sqrt();
        }
    }
    Ok(Moments { q, count: r, mean: mu, cov, cov_se })
}

impl Moments {
    pub fn diag(&self) -> Vec<f64> {
        (0..self.q).map(|i| self.cov[i * self.q + i]).collect()
    }

    pub fn diag_se(&self) -> Vec<f64> {
        (0..self.q).map(|i| self.cov_se[i * self.q + i]).collect()
    }
}

fn symmetric_eigenvalues(m: &[f64], q: usize) -> Vec<f64> {
    if q == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(DMatrix::from_row_slice(q, q, m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Largest eigenvalue of a symmetric `q x q` matrix.
pub fn spectral_norm(m: &[f64], q: usize) -> f64 {
    symmetric_eigenvalues(m, q).last().copied().unwrap_or(0.0).max(0.0)
}

pub fn min_eigenvalue(m: &[f64], q: usize) -> f64 {
    symmetric_eigenvalues(m, q).first().copied().unwrap_or(0.0)
}

/// `(1/sqrt q) ||Cov||` with the spectral norm, and the diagonal-max variant.
pub fn normalized_norms(cov: &[f64], q: usize) -> (f64, f64) {
    let s = (q as f64).sqrt();
    let dmax = (0..q).map(|i| cov[i * q + i]).fold(0.0, f64::max);
    (spectral_norm(cov, q) / s, dmax / s)
}

/// Something that produces one update vector per call.
pub trait UpdateGenerator {
    /// Parameter count `q`.
    fn dim(&self) -> usize;
    fn batch(&self) -> usize;
    fn group_draws(&self) -> usize;
    /// One update with batch size `n` from the stream `seed`.
    fn generate(&self, method: Method, n: usize, seed: u64) -> Result<GeneratedUpdate>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedUpdate {
    pub delta_theta: Vec<f64>,
    pub node_resamples: usize,
    pub bound_violations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingMode {
    /// Rejection sampling under a bound found from `probes` random points,
    /// raised by `margin` in `log|psi|^2`.
    Exact { probes: usize, margin: f64 },
    Mcmc(McmcParams),
}

/// Frozen parameters, a group and a batch layout.
#[derive(Debug, Clone)]
pub struct UpdateFixture<'a> {
    pub h: &'a Hamiltonian,
    pub ansatz: &'a Ansatz,
    pub group: &'a SpaceGroup,
    pub n: usize,
    pub k: usize,
    pub baseline: Baseline,
    pub sampling: SamplingMode,
    ga_elements: Vec<Isometry>,
    base_bound: f64,
    ga_bound: f64,
}

impl<'a> UpdateFixture<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        h: &'a Hamiltonian,
        ansatz: &'a Ansatz,
        group: &'a SpaceGroup,
        n: usize,
        k: usize,
        baseline: Baseline,
        sampling: SamplingMode,
        ga_subset: Option<&[usize]>,
        seed: u64,
    ) -> Result<Self> {
        let ga_elements = match ga_subset {
            Some(ix) => group.subset(ix)?,
            None => group.elements().to_vec(),
        };
        let (mut base_bound, mut ga_bound) = (f64::INFINITY, f64::INFINITY);
        if let SamplingMode::Exact { probes, margin } = sampling {
            let s = stream_seed(seed, NESTED);
            base_bound = ExactSource::with_estimated_bound(ansatz, probes, margin, s, ansatz.n_up())?.log_bound();
            let ga = GroupAveraged::new(ansatz, ga_elements.clone())?;
            ga_bound = ExactSource::with_estimated_bound(&ga, probes, margin, s, ansatz.n_up())?.log_bound();
        }
        Ok(UpdateFixture { h, ansatz, group, n, k, baseline, sampling, ga_elements, base_bound, ga_bound })
    }

    pub fn ga_elements(&self) -> &[Isometry] {
        &self.ga_elements
    }

    fn steps_per_draw(&self) -> usize {
        match self.sampling {
            SamplingMode::Exact { .. } => 0,
            SamplingMode::Mcmc(p) => p.steps_per_draw,
        }
    }

    fn source(&self, bound: f64, seed: u64) -> Result<Box<dyn SampleSource>> {
        Ok(match self.sampling {
            SamplingMode::Exact { .. } => Box::new(ExactSource::new(bound, seed, self.ansatz.n_up())),
            SamplingMode::Mcmc(p) => Box::new(McmcSource::new(p, seed, self.ansatz.n_up())?),
        })
    }

    /// One full update estimate drawn from the stream `seed`.
    pub fn estimate(&self, method: Method, n: usize, seed: u64) -> Result<(UpdateEstimate, u64)> {
        let m = self.steps_per_draw();
        let (h, a, k, b) = (self.h, self.ansatz, self.k, self.baseline);
        let (est, src) = match method {
            Method::Og => {
                let mut src = self.source(self.base_bound, seed)?;
                (update_og(h, a, src.as_mut(), n, m, b)?, src)
            }
            Method::Da => {
                let mut src = self.source(self.base_bound, seed)?;
                (update_da(h, a, self.group, src.as_mut(), n, k, m, b, da_seed(seed, 0))?, src)
            }
            Method::Ga => {
                let mut src = self.source(self.ga_bound, seed)?;
                (update_ga(h, a, &self.ga_elements, src.as_mut(), n, k, m, b)?, src)
            }
            Method::Gas => {
                let bound = match self.sampling {
                    SamplingMode::Exact { probes, margin } => {
                        let subset = crate::symmetrize::gas_subsample(
                            self.group,
                            k,
                            0,
                            stream_seed(seed, crate::rng::GAS_SUBSAMPLE),
                        )?;
                        let ga = GroupAveraged::new(a, subset)?;
                        ExactSource::with_estimated_bound(&ga, probes, margin, seed, a.n_up())?.log_bound()
                    }
                    SamplingMode::Mcmc(_) => f64::INFINITY,
                };
                let mut src = self.source(bound, seed)?;
                (update_gas(h, a, self.group, src.as_mut(), n, k, m, b, 0, seed)?, src)
            }
        };
        Ok((est, src.bound_violations()))
    }

    /// Largest `| log|psi(g x)|^2 - log|psi(x)|^2 |` over random points.
    pub fn density_defect(&self, probes: usize, seed: u64) -> Result<f64> {
        let mut rng = child_rng(seed, 0);
        let a = self.ansatz;
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let c = crate::sampler::random_configuration(&mut rng, a.dim(), a.n_up(), a.n_down());
            let l0 = log_prob(a, &c)?;
            if !l0.is_finite() {
                continue;
            }
            for g in self.group.elements() {
                let l = log_prob(a, &apply_diagonal(g, &c)?)?;
                worst = worst.max((l - l0).abs() / l0.abs().max(1.0));
            }
        }
        Ok(worst)
    }
}

impl UpdateGenerator for UpdateFixture<'_> {
    fn dim(&self) -> usize {
        self.ansatz.n_params()
    }

    fn batch(&self) -> usize {
        self.n
    }

    fn group_draws(&self) -> usize {
        self.k
    }

    fn generate(&self, method: Method, n: usize, seed: u64) -> Result<GeneratedUpdate> {
        let (est, viol) = self.estimate(method, n, seed)?;
        Ok(GeneratedUpdate { delta_theta: est.delta_theta, node_resamples: est.node_resamples, bound_violations: viol })
    }
}

pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    child_seed(stream_seed(seed, REPLICATES), r as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub method: Method,
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub q: usize,
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
    pub cov: Vec<f64>,
    /// `(1/sqrt q)` times the largest covariance eigenvalue.
    pub norm: f64,
    /// Bootstrap standard error of `norm`.
    pub norm_se: f64,
    /// `(1/sqrt q)` times the largest covariance diagonal entry.
    pub diag_max_norm: f64,
    pub node_resamples: usize,
    pub bound_violations: u64,
    pub updates: Vec<Vec<f64>>,
}

fn bootstrap_indices(r: usize, b: usize, seed: u64) -> Vec<usize> {
    let mut rng = child_rng(stream_seed(seed, BOOTSTRAP), b as u64);
    (0..r).map(|_| rng.random_range(0..r)).collect()
}

fn resample<T: Clone>(v: &[T], ix: &[usize]) -> Vec<T> {
    ix.iter().map(|&i| v[i].clone()).collect()
}

fn std_dev(v: &[f64]) -> f64 {
    crate::metrics::variance(v).sqrt()
}

/// `replicates` independent updates at frozen parameters.
pub fn update_distribution(
    method: Method,
    generator: &dyn UpdateGenerator,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<UpdateStats> {
    if replicates < 2 {
        return Err(Error::TooFewSamples { got: replicates, need: 2 });
    }
    let mut updates = Vec::with_capacity(replicates);
    let (mut nodes, mut viol) = (0, 0);
    for r in 0..replicates {
        let u = generator.generate(method, n, replicate_seed(seed, r))?;
        nodes += u.node_resamples;
        viol += u.bound_violations;
        updates.push(u.delta_theta);
    }
    let mo = moments(&updates)?;
    let q = mo.q;
    let (norm, diag_max_norm) = normalized_norms(&mo.cov, q);
    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|b| {
            let ix = bootstrap_indices(replicates, b, seed);
            let m = moments(&resample(&updates, &ix)).expect("at least two replicates");
            normalized_norms(&m.cov, q).0
        })
        .collect();
    Ok(UpdateStats {
        method,
        n,
        k: generator.group_draws(),
        replicates,
        q,
        cov_diag: mo.diag(),
        mean: mo.mean,
        cov: mo.cov,
        norm,
        norm_se: std_dev(&boot),
        diag_max_norm,
        node_resamples: nodes,
        bound_violations: viol,
        updates,
    })
}

/// Measured against predicted values with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub measured: Vec<f64>,
    pub predicted: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Largest `|measured - predicted| / sigma`.
    pub max_z: f64,
    /// Entries outside `SIGMA_LEVEL` sigma.
    pub violations: usize,
    pub passed: bool,
}

impl IdentityCheck {
    pub fn new(measured: Vec<f64>, predicted: Vec<f64>, sigma: Vec<f64>) -> Self {
        let mut max_z: f64 = 0.0;
        let mut violations = 0;
        for ((m, p), s) in measured.iter().zip(&predicted).zip(&sigma) {
            let diff = (m - p).abs();
            let z = if diff == 0.0 {
                0.0
            } else if *s > 0.0 {
                diff / s
            } else {
                f64::INFINITY
            };
            if z > SIGMA_LEVEL {
                violations += 1;
            }
            max_z = max_z.max(z);
        }
        IdentityCheck { measured, predicted, sigma, max_z, violations, passed: violations == 0 }
    }
}

fn upper(m: &[f64], q: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(q * (q + 1) / 2);
    for i in 0..q {
        for j in i..q {
            out.push(m[i * q + j]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop41Report {
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub q: usize,
    /// DA mean against OG mean.
    pub mean: IdentityCheck,
    /// Upper triangle of `Cov_DA - Cov_OG` against `(k-1)/N Cov[E[F|X]]`.
    pub excess: IdentityCheck,
    pub min_eigenvalue: f64,
    /// Noise scale of the excess matrix (Frobenius norm of entry errors).
    pub min_eigenvalue_sigma: f64,
    pub loewner_passed: bool,
    pub og_norm: f64,
    pub da_norm: f64,
    pub bound_violations: u64,
    pub passed: bool,
}

/// Samples of `E[F | X] = (1/|G|) sum_g F(g X)` for `count` exact draws.
fn conditional_means(fixture: &UpdateFixture<'_>, count: usize, seed: u64) -> Result<(Vec<Vec<f64>>, u64)> {
    let a = fixture.ansatz;
    let mut src = ExactSource::new(fixture.base_bound, stream_seed(seed, NESTED), a.n_up());
    let xs = src.draw(a, count)?;
    let mut raw = Vec::with_capacity(count);
    let mut energies = Vec::new();
    for (i, mut x) in xs.into_iter().enumerate() {
        let mut tries = 0;
        'draw: loop {
            let mut block = Vec::with_capacity(fixture.group.order());
            for g in fixture.group.elements() {
                match local_term(fixture.h, a, &apply_diagonal(g, &x)?)? {
                    Some(t) => block.push(t),
                    None => {
                        tries += 1;
                        if tries > crate::update::NODE_RETRIES {
                            return Err(Error::ResampleBudget(crate::update::NODE_RETRIES));
                        }
                        x = src.redraw(a, i)?;
                        continue 'draw;
                    }
                }
            }
            energies.extend(block.iter().map(|t| t.0));
            raw.push(block);
            break;
        }
    }
    let b = match fixture.baseline {
        Baseline::Fixed(v) => v,
        Baseline::BatchMean => mean(&energies),
    };
    let q = a.n_params();
    let out = raw
        .into_iter()
        .map(|block| {
            let mut f = vec![0.0; q];
            for (el, g) in &block {
                for (o, x) in f.iter_mut().zip(g) {
                    *o += 2.0 * (el - b) * x;
                }
            }
            f.iter_mut().for_each(|o| *o /= block.len() as f64);
            f
        })
        .collect();
    Ok((out, src.bound_violations()))
}

/// Invariant-case DA/OG comparison. Requires exact sampling.
pub fn prop41_check(fixture: &UpdateFixture<'_>, replicates: usize, seed: u64) -> Result<Prop41Report> {
    if !matches!(fixture.sampling, SamplingMode::Exact { .. }) {
        return Err(Error::Invalid("the DA/OG identity check needs exact sampling".into()));
    }
    let defect = fixture.density_defect(500, seed)?;
    if defect > 1e-8 {
        return Err(Error::NotInvariant(alloc::format!("|psi|^2 changes by {defect:e} under the group")));
    }
    let (n, k) = (fixture.n, fixture.k);
    let og = update_distribution(Method::Og, fixture, n, replicates, seed)?;
    let da = update_distribution(Method::Da, fixture, n, replicates, seed)?;
    let q = og.q;
    let og_m = moments(&og.updates)?;
    let da_m = moments(&da.updates)?;
    let mean_sigma: Vec<f64> =
        (0..q).map(|i| ((og_m.cov[i * q + i] + da_m.cov[i * q + i]) / replicates as f64).sqrt()).collect();
    let mean = IdentityCheck::new(da_m.mean.clone(), og_m.mean.clone(), mean_sigma);

    let nested_count = replicates * (n / k).max(1);
    let (cond, viol) = conditional_means(fixture, nested_count, seed)?;
    let cm = moments(&cond)?;
    let scale = (k as f64 - 1.0) / n as f64;
    let diff: Vec<f64> = da_m.cov.iter().zip(&og_m.cov).map(|(a, b)| a - b).collect();
    let predicted: Vec<f64> = cm.cov.iter().map(|c| scale * c).collect();
    let sigma: Vec<f64> = (0..q * q)
        .map(|i| (da_m.cov_se[i].powi(2) + og_m.cov_se[i].powi(2) + (scale * cm.cov_se[i]).powi(2)).sqrt())
        .collect();
    let excess = IdentityCheck::new(upper(&diff, q), upper(&predicted, q), upper(&sigma, q));
    let min_eig = min_eigenvalue(&diff, q);
    let frob = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    let loewner_passed = min_eig >= -SIGMA_LEVEL * frob;
    Ok(Prop41Report {
        n,
        k,
        replicates,
        q,
        passed: mean.passed && excess.passed && loewner_passed,
        mean,
        excess,
        min_eigenvalue: min_eig,
        min_eigenvalue_sigma: frob,
        loewner_passed,
        og_norm: og.norm,
        da_norm: da.norm,
        bound_violations: og.bound_violations + da.bound_violations + viol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma42Report {
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub q: usize,
    /// `(N/k) Var[delta theta_GA]` against the single-draw `Var[F]`, per
    /// coordinate.
    pub check: IdentityCheck,
    pub bound_violations: u64,
    pub passed: bool,
}

/// GA replicate variance against the single-draw variance of `F` on the
/// averaged wavefunction. The single draws are the pooled per-sample terms.
pub fn lemma42_check(fixture: &UpdateFixture<'_>, replicates: usize, seed: u64) -> Result<Lemma42Report> {
    if replicates < 2 {
        return Err(Error::TooFewSamples { got: replicates, need: 2 });
    }
    let (n, k) = (fixture.n, fixture.k);
    let per = crate::update::check_divisible(n, k)?;
    let mut updates = Vec::with_capacity(replicates);
    let mut singles = Vec::with_capacity(replicates * per);
    let mut viol = 0;
    for r in 0..replicates {
        let (est, v) = fixture.estimate(Method::Ga, n, replicate_seed(seed, r))?;
        viol += v;
        singles.extend(est.terms.f_terms(fixture.baseline));
        updates.push(est.delta_theta);
    }
    let rep = moments(&updates)?;
    let one = moments(&singles)?;
    let f = per as f64;
    let measured: Vec<f64> = rep.diag().iter().map(|v| v * f).collect();
    let sigma: Vec<f64> = rep.diag_se().iter().zip(one.diag_se()).map(|(a, b)| ((a * f).powi(2) + b * b).sqrt()).collect();
    let check = IdentityCheck::new(measured, one.diag(), sigma);
    Ok(Lemma42Report { n, k, replicates, q: rep.q, passed: check.passed, check, bound_violations: viol })
}

/// Finite toy for the invariant-case identity: a distribution on points, a
/// group acting by permutations, and a scalar `F`. Everything is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteToy {
    pub probs: Vec<Ratio<i128>>,
    /// `action[g][x]` is the image of point `x` under element `g`.
    pub action: Vec<Vec<usize>>,
    pub f: Vec<Ratio<i128>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteExcess {
    pub var_og: Ratio<i128>,
    pub var_da: Ratio<i128>,
    /// `Var_DA - Var_OG` from exhaustive enumeration.
    pub measured: Ratio<i128>,
    /// `(k-1)/N Var[E[F|X]]`.
    pub predicted: Ratio<i128>,
}

impl DiscreteToy {
    /// Two points swapped by `Z_2`, uniform.
    pub fn two_point(fa: i64, fb: i64) -> Self {
        let h = Ratio::new(1, 2);
        DiscreteToy { probs: vec![h, h], action: vec![vec![0, 1], vec![1, 0]], f: vec![Ratio::from_integer(fa as i128), Ratio::from_integer(fb as i128)] }
    }

    /// Two `Z_2` orbits `{a, g a}` and `{b, g b}` with weights `w, 1 - w`.
    pub fn four_point(w: Ratio<i128>, f: [i64; 4]) -> Self {
        let half = Ratio::new(1, 2);
        let v = Ratio::from_integer(1) - w;
        DiscreteToy {
            probs: vec![w * half, w * half, v * half, v * half],
            action: vec![vec![0, 1, 2, 3], vec![1, 0, 3, 2]],
            f: f.iter().map(|&x| Ratio::from_integer(x as i128)).collect(),
        }
    }

    pub fn is_invariant(&self) -> bool {
        self.action.iter().all(|perm| perm.iter().enumerate().all(|(x, &gx)| self.probs[x] == self.probs[gx]))
    }

    fn var_of<I: Iterator<Item = (Ratio<i128>, Ratio<i128>)> + Clone>(outcomes: I) -> Ratio<i128> {
        let m: Ratio<i128> = outcomes.clone().map(|(p, v)| p * v).fold(Ratio::zero(), |a, b| a + b);
        outcomes.map(|(p, v)| p * (v - m) * (v - m)).fold(Ratio::zero(), |a, b| a + b)
    }

    /// Exact variances of the OG and DA updates for batch `n` and `k` draws,
    /// enumerating every `(x, g_1, ..., g_k)` outcome.
    pub fn excess(&self, n: usize, k: usize) -> Result<DiscreteExcess> {
        if !self.is_invariant() {
            return Err(Error::NotInvariant("toy distribution is not group invariant".into()));
        }
        let per = crate::update::check_divisible(n, k)?;
        let order = self.action.len();
        let pg = Ratio::new(1, order as i128);
        let var_f = Self::var_of(self.probs.iter().copied().zip(self.f.iter().copied()));
        let var_og = var_f / Ratio::from_integer(n as i128);
        // A = (1/k) sum_j F(g_j x), enumerated over x and all k-tuples
        let mut outcomes = Vec::new();
        let tuples = order.pow(k as u32);
        for (x, &px) in self.probs.iter().enumerate() {
            for code in 0..tuples {
                let mut c = code;
                let mut a = Ratio::zero();
                for _ in 0..k {
                    a += self.f[self.action[c % order][x]];
                    c /= order;
                }
                outcomes.push((px * pg.pow(k as i32), a / Ratio::from_integer(k as i128)));
            }
        }
        let var_a = Self::var_of(outcomes.iter().copied());
        let var_da = var_a / Ratio::from_integer(per as i128);
        let cond = self.probs.iter().enumerate().map(|(x, &px)| {
            let s = self.action.iter().map(|perm| self.f[perm[x]]).fold(Ratio::zero(), |a, b| a + b);
            (px, s / Ratio::from_integer(order as i128))
        });
        let var_cond = Self::var_of(cond);
        let predicted = Ratio::new(k as i128 - 1, n as i128) * var_cond;
        Ok(DiscreteExcess { var_og, var_da, measured: var_da - var_og, predicted })
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `v`
/// and the continuous CDF `cdf`.
pub fn ks_distance(v: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// KS distance to the normal with the sample mean and standard deviation.
pub fn ks_normal(v: &[f64]) -> f64 {
    let m = mean(v);
    let s = std_dev(v);
    if !(s > 0.0) {
        return 1.0;
    }
    ks_distance(v, &|x| normal_cdf((x - m) / s))
}

/// KS distance of `max_l |x_l - mean_l|` to `max_l sigma_l |Z_l|` with
/// independent standard normals `Z_l`.
pub fn ks_max_deviation(samples: &[Vec<f64>]) -> f64 {
    let q = samples.first().map_or(0, |s| s.len());
    let cols: Vec<Vec<f64>> = (0..q).map(|l| samples.iter().map(|s| s[l]).collect()).collect();
    let mu: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let sd: Vec<f64> = cols.iter().map(|c| std_dev(c)).collect();
    let stat: Vec<f64> = samples
        .iter()
        .map(|s| s.iter().zip(&mu).map(|(x, m)| (x - m).abs()).fold(0.0, f64::max))
        .collect();
    let cdf = |t: f64| -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        sd.iter()
            .filter(|s| **s > 0.0)
            .map(|s| libm::erf(t / (s * core::f64::consts::SQRT_2)))
            .product()
    };
    ks_distance(&stat, &cdf)
}

fn skewness(v: &[f64]) -> f64 {
    let m = mean(v);
    let n = v.len() as f64;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    if m2 > 0.0 {
        m3 / m2.powf(1.5)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub n: usize,
    pub replicates: usize,
    pub q: usize,
    pub ks: Vec<f64>,
    pub ks_se: Vec<f64>,
    pub ks_max_dev: f64,
    pub ks_max_dev_se: f64,
    pub skewness: Vec<f64>,
    /// Two-sided 99.9% Dvoretzky-Kiefer-Wolfowitz half-width for this `R`.
    pub dkw_band: f64,
}

pub fn dkw_band(replicates: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * replicates as f64)).sqrt()
}

pub fn clt_report(updates: &[Vec<f64>], n: usize, seed: u64) -> Result<CltReport> {
    let r = updates.len();
    if r < 2 {
        return Err(Error::TooFewSamples { got: r, need: 2 });
    }
    let q = updates[0].len();
    let col = |u: &[Vec<f64>], l: usize| -> Vec<f64> { u.iter().map(|s| s[l]).collect() };
    let ks: Vec<f64> = (0..q).map(|l| ks_normal(&col(updates, l))).collect();
    let skew: Vec<f64> = (0..q).map(|l| skewness(&col(updates, l))).collect();
    let ks_max_dev = ks_max_deviation(updates);
    let mut boot_ks = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); q];
    let mut boot_max = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let ix = bootstrap_indices(r, b, seed);
        let u = resample(updates, &ix);
        for (l, bk) in boot_ks.iter_mut().enumerate() {
            bk.push(ks_normal(&col(&u, l)));
        }
        boot_max.push(ks_max_deviation(&u));
    }
    Ok(CltReport {
        n,
        replicates: r,
        q,
        ks,
        ks_se: boot_ks.iter().map(|v| std_dev(v)).collect(),
        ks_max_dev,
        ks_max_dev_se: std_dev(&boot_max),
        skewness: skew,
        dkw_band: dkw_band(r, 1e-3),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltSweep {
    pub method: Method,
    pub reports: Vec<CltReport>,
    /// Every coordinate's KS distance is non-increasing along the grid up to
    /// `SIGMA_LEVEL` bootstrap standard errors.
    pub monotone: bool,
}

pub fn clt_check(
    method: Method,
    generator: &dyn UpdateGenerator,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<CltSweep> {
    let mut reports = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let s = child_seed(seed, i as u64);
        let stats = update_distribution(method, generator, n, replicates, s)?;
        reports.push(clt_report(&stats.updates, n, s)?);
    }
    let monotone = reports.windows(2).all(|w| {
        (0..w[0].q).all(|l| {
            let tol = SIGMA_LEVEL * (w[0].ks_se[l].powi(2) + w[1].ks_se[l].powi(2)).sqrt();
            w[1].ks[l] <= w[0].ks[l] + tol
        })
    });
    Ok(CltSweep { method, reports, monotone })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// `F_l(u) = 1{frac((2l+1) u) < p} - p` with `u` uniform on `[0, 1)`.
    Bernoulli,
    /// Updates are exactly normal: `F` is a standard normal vector.
    Normal,
}

/// Update generator with closed-form `F`, a uniform invariant sample `u` and
/// the cyclic group of shifts `u -> u + j/order`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFixture {
    pub kind: SyntheticKind,
    pub q: usize,
    pub order: usize,
    pub k: usize,
    pub p: f64,
    pub n: usize,
}

impl SyntheticFixture {
    fn f(&self, u: f64) -> Vec<f64> {
        (0..self.q)
            .map(|l| {
                let v = ((2 * l + 1) as f64 * u).fract();
                if v < self.p {
                    1.0 - self.p
                } else {
                    -self.p
                }
            })
            .collect()
    }

    fn shifted(&self, u: f64, j: usize) -> f64 {
        (u + j as f64 / self.order as f64).fract()
    }
}

impl UpdateGenerator for SyntheticFixture {
    fn dim(&self) -> usize {
        self.q
    }

    fn batch(&self) -> usize {
        self.n
    }

    fn group_draws(&self) -> usize {
        self.k
    }

    fn generate(&self, method: Method, n: usize, seed: u64) -> Result<GeneratedUpdate> {
        let mut rng = child_rng(seed, 0);
        let q = self.q;
        let mut acc = vec![0.0; q];
        let mut add = |f: &[f64], w: f64| {
            for (a, x) in acc.iter_mut().zip(f) {
                *a += w * x;
            }
        };
        if self.kind == SyntheticKind::Normal {
            for _ in 0..n {
                let z: Vec<f64> = (0..q).map(|_| StandardNormal.sample(&mut rng)).collect();
                add(&z, 1.0 / n as f64);
            }
        } else {
            match method {
                Method::Og => {
                    for _ in 0..n {
                        let u: f64 = rng.random();
                        add(&self.f(u), 1.0 / n as f64);
                    }
                }
                Method::Da => {
                    let per = crate::update::check_divisible(n, self.k)?;
                    for _ in 0..per {
                        let u: f64 = rng.random();
                        for _ in 0..self.k {
                            let j = rng.random_range(0..self.order);
                            add(&self.f(self.shifted(u, j)), 1.0 / n as f64);
                        }
                    }
                }
                Method::Ga | Method::Gas => {
                    let count = if method == Method::Ga { crate::update::check_divisible(n, self.k)? } else { n };
                    let subset: Vec<usize> = if method == Method::Ga {
                        (0..self.order).collect()
                    } else {
                        rand::seq::index::sample(&mut rng, self.order, self.k.min(self.order)).into_vec()
                    };
                    for _ in 0..count {
                        let u: f64 = rng.random();
                        for &j in &subset {
                            add(&self.f(self.shifted(u, j)), 1.0 / (count * subset.len()) as f64);
                        }
                    }
                }
            }
        }
        Ok(GeneratedUpdate { delta_theta: acc, node_resamples: 0, bound_violations: 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupRow {
    pub epsilon: f64,
    pub max_d1: f64,
    pub max_d2: f64,
    /// Largest `|E_local(psi^SC) - E_local(psi)|` over scan points inside
    /// the smoothing shell.
    pub energy_deviation: f64,
    pub scan_points: usize,
    pub shell_points: usize,
    pub nodes_skipped: usize,
}

/// `max |d lambda_eps|` and `max |d^2 lambda_eps|` on a grid of `[0, eps]`.
pub fn lambda_maxima(spec: &SmoothingSpec) -> (f64, f64) {
    let (mut m1, mut m2): (f64, f64) = (0.0, 0.0);
    for i in 0..LAMBDA_GRID {
        let y = spec.epsilon * i as f64 / (LAMBDA_GRID - 1) as f64;
        let [_, d1, d2] = lambda_eps_derivs(spec, y);
        m1 = m1.max(d1.abs());
        m2 = m2.max(d2.abs());
    }
    (m1, m2)
}

/// `points` copies of `base` with electron `electron` moved along `axis`
/// over one period.
pub fn electron_scan(base: &Configuration, electron: usize, axis: usize, points: usize) -> Vec<Configuration> {
    (0..points)
        .map(|i| {
            let mut c = base.clone();
            c.position_mut(electron)[axis] = i as f64 / points as f64;
            c
        })
        .collect()
}

/// Some electron has two or more boundary-set members with positive weight.
pub fn in_shell(region: &FundamentalRegion, spec: &SmoothingSpec, group: &SpaceGroup, c: &Configuration) -> Result<bool> {
    for i in 0..c.n() {
        let b = boundary_set(region, spec, group, c.position(i))?;
        if b.members.iter().filter(|m| m.weight > 0.0).count() > 1 {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn blowup_probe<W: Wavefunction + ?Sized>(
    h: &Hamiltonian,
    base: &W,
    group: &SpaceGroup,
    region: &FundamentalRegion,
    kind: StepKind,
    epsilons: &[f64],
    scan: &[Configuration],
) -> Result<Vec<BlowupRow>> {
    let mut base_e = Vec::with_capacity(scan.len());
    for c in scan {
        base_e.push(match local_energy(h, base, c) {
            Ok(e) => Some(e),
            Err(Error::Node) => None,
            Err(e) => return Err(e),
        });
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let spec = SmoothingSpec::new(kind, eps)?;
        let (max_d1, max_d2) = lambda_maxima(&spec);
        let sc = SmoothedCanonical::new(base, group.clone(), region.clone(), spec)?;
        let (mut dev, mut skipped, mut shell): (f64, usize, usize) = (0.0, 0, 0);
        for (c, e0) in scan.iter().zip(&base_e) {
            if !in_shell(region, &spec, group, c)? {
                continue;
            }
            shell += 1;
            match (e0, local_energy(h, &sc, c)) {
                (Some(e0), Ok(e)) => dev = dev.max((e - e0).abs()),
                (_, Err(Error::Node)) | (None, _) => skipped += 1,
                (_, Err(e)) => return Err(e),
            }
        }
        rows.push(BlowupRow { epsilon: eps, max_d1, max_d2, energy_deviation: dev, scan_points: scan.len(), shell_points: shell, nodes_skipped: skipped });
    }
    Ok(rows)
}
