//! Energy estimates with batch-means error bars and the PA/OG ratio variance.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::ansatz::Wavefunction;
use crate::error::{Error, Result};
use crate::groups::{apply_diagonal, Configuration, Isometry};
use crate::hamiltonian::{local_energy_from_eval, Hamiltonian};

pub const BATCH_BLOCKS: usize = 32;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Standard error of the mean from `blocks` contiguous batch means. Falls
/// back to the naive error when there are fewer values than blocks.
pub fn batch_means_stderr(v: &[f64], blocks: usize) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    if n < 2 * blocks {
        return (variance(v) / n as f64).sqrt();
    }
    let size = n / blocks;
    let means: Vec<f64> = (0..blocks).map(|b| mean(&v[b * size..(b + 1) * size])).collect();
    (variance(&means) / blocks as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyMetrics {
    pub energy: f64,
    pub stderr: f64,
    pub variance: f64,
    /// Batch-means error of `variance`.
    pub variance_stderr: f64,
    pub acceptance: f64,
    pub n_samples: usize,
    pub nodes_skipped: usize,
}

/// Local energies at `samples`, nodes skipped and counted.
pub fn local_energies<W: Wavefunction + ?Sized>(h: &Hamiltonian, psi: &W, samples: &[Configuration]) -> Result<(Vec<f64>, usize)> {
    let mut out = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for c in samples {
        let e = psi.evaluate(c)?;
        match local_energy_from_eval(h, &e, c) {
            Ok(v) => out.push(v),
            Err(Error::Node) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

pub fn evaluate_metrics<W: Wavefunction + ?Sized>(
    h: &Hamiltonian,
    psi: &W,
    samples: &[Configuration],
    acceptance: f64,
) -> Result<EnergyMetrics> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { got: samples.len(), need: 2 });
    }
    let (el, skipped) = local_energies(h, psi, samples)?;
    if el.len() < 2 {
        return Err(Error::TooFewSamples { got: el.len(), need: 2 });
    }
    let m = mean(&el);
    let sq: Vec<f64> = el.iter().map(|e| (e - m) * (e - m)).collect();
    Ok(EnergyMetrics {
        energy: m,
        stderr: batch_means_stderr(&el, BATCH_BLOCKS),
        variance: variance(&el),
        variance_stderr: batch_means_stderr(&sq, BATCH_BLOCKS),
        acceptance,
        n_samples: el.len(),
        nodes_skipped: skipped,
    })
}

/// Sample variance of `(1/|S|) sum_g psi(g x) / psi(x)` over `samples`;
/// returns the variance and the number of samples skipped at nodes of `psi`.
pub fn var_pa_over_og<W: Wavefunction + ?Sized>(psi: &W, subset: &[Isometry], samples: &[Configuration]) -> Result<(f64, usize)> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut ratios = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for c in samples {
        let (l0, s0) = psi.value(c)?;
        if s0 == 0.0 {
            skipped += 1;
            continue;
        }
        let mut r = 0.0;
        for g in subset {
            let (l, s) = psi.value(&apply_diagonal(g, c)?)?;
            r += s * s0 * (l - l0).exp();
        }
        ratios.push(r / subset.len() as f64);
    }
    if ratios.len() < 2 {
        return Err(Error::TooFewSamples { got: ratios.len(), need: 2 });
    }
    Ok((variance(&ratios), skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::perturb_asymmetric;
    use crate::groups::SpaceGroup;
    use crate::sampler::{sample_series, ExactSource, SampleSource};
    use crate::testutil::*;

    #[test]
    fn batch_means_of_iid_data() {
        use rand::Rng;
        let mut r = rng(1);
        let v: Vec<f64> = (0..32_000).map(|_| r.random::<f64>()).collect();
        let se = batch_means_stderr(&v, 32);
        let naive = (variance(&v) / v.len() as f64).sqrt();
        assert!((se / naive - 1.0).abs() < 0.4);
    }

    #[test]
    fn exact_state_has_zero_variance() {
        let (h, a, e) = well_chain_exact();
        let (samples, acc) = sample_series(&a, 4, 500, 2, 100, 0.3, 2, 2).unwrap();
        let m = evaluate_metrics(&h, &a, &samples, acc).unwrap();
        assert!(m.variance <= 1e-16 * e * e + 1e-20, "{}", m.variance);
        assert!((m.energy - e).abs() < 1e-8);
    }

    #[test]
    fn too_few_samples() {
        let (h, a, _) = well_chain_exact();
        let (s, _) = sample_series(&a, 1, 1, 1, 0, 0.3, 3, 2).unwrap();
        assert_eq!(evaluate_metrics(&h, &a, &s, 1.0), Err(Error::TooFewSamples { got: 1, need: 2 }));
    }

    #[test]
    fn pa_ratio_variance() {
        let (_, a, _) = well_chain_exact();
        let group = SpaceGroup::builtin("chain-reflection").unwrap();
        let mut src = ExactSource::with_estimated_bound(&a, 4000, 1.0, 4, 2).unwrap();
        let samples = src.draw(&a, 2000).unwrap();
        let (v, _) = var_pa_over_og(&a, group.elements(), &samples).unwrap();
        assert!(v <= 1e-10, "{v}");
        let (v, _) = var_pa_over_og(&a, &[Isometry::identity(1)], &samples).unwrap();
        assert!(v <= 1e-20);
        let mut last = f64::INFINITY;
        for m in [0.3, 0.1, 0.03] {
            let p = perturb_asymmetric(&a, &group, m, 5).unwrap();
            let mut src = ExactSource::with_estimated_bound(&p, 4000, 1.0, 6, 2).unwrap();
            let samples = src.draw(&p, 4000).unwrap();
            let (v, _) = var_pa_over_og(&p, group.elements(), &samples).unwrap();
            assert!(v < last, "{m}: {v} !< {last}");
            last = v;
        }
    }
}
