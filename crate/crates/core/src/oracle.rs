//! Exact single-particle spectra in a plane-wave basis and the Slater ground
//! state built from them.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;
use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::ansatz::Ansatz;
use crate::basis::{BasisFunction, PlaneWaveBasis};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

/// Levels closer than this at the Fermi edge make the ground state degenerate.
pub const DEGENERACY_GAP: f64 = 1e-9;

/// Allowed shift of the checked levels when the cutoff grows by two.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// Column `j` is eigenvector `j` in the orthonormal basis
    /// `{1, sqrt2 cos, sqrt2 sin}`.
    pub eigenvectors: DMatrix<f64>,
    pub basis: PlaneWaveBasis,
    pub cutoff: u32,
}

/// Exponential expansion `f = sum_p alpha_p exp(2 pi i p.x)` of an
/// orthonormal basis function.
fn exponentials(f: &BasisFunction) -> Vec<([i32; 3], Complex<f64>)> {
    let h = SQRT_2 / 2.0;
    match *f {
        BasisFunction::Constant => vec![([0; 3], Complex::new(1.0, 0.0))],
        BasisFunction::Cos(k) => vec![(k, Complex::new(h, 0.0)), (neg(k), Complex::new(h, 0.0))],
        BasisFunction::Sin(k) => vec![(k, Complex::new(0.0, -h)), (neg(k), Complex::new(0.0, h))],
    }
}

fn neg(k: [i32; 3]) -> [i32; 3] {
    [-k[0], -k[1], -k[2]]
}

/// The one-body Hamiltonian matrix in the orthonormal real basis.
pub fn assemble(h: &Hamiltonian, basis: &PlaneWaveBasis) -> DMatrix<f64> {
    let nb = basis.len();
    let kappa = basis.kinetic_factors(h.cell());
    let expansions: Vec<_> = basis.functions().iter().map(exponentials).collect();
    let mut m = DMatrix::zeros(nb, nb);
    for a in 0..nb {
        m[(a, a)] += 0.5 * kappa[a];
        for b in a..nb {
            // <f|v|g> = sum_{p,q} alpha_p beta_q V_{-p-q}
            let mut acc = Complex::new(0.0, 0.0);
            for (p, ap) in &expansions[a] {
                for (q, bq) in &expansions[b] {
                    let k = [-p[0] - q[0], -p[1] - q[1], -p[2] - q[2]];
                    acc += ap * bq * h.fourier(&k);
                }
            }
            m[(a, b)] += acc.re;
            if a != b {
                m[(b, a)] += acc.re;
            }
        }
    }
    m
}

fn solve(h: &Hamiltonian, cutoff: u32) -> SpectrumResult {
    let basis = PlaneWaveBasis::new(h.cell().lattice, cutoff);
    let m = assemble(h, &basis);
    let eig = SymmetricEigen::new(m);
    let nb = basis.len();
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap().then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(nb, nb, |r, c| eig.eigenvectors[(r, order[c])]);
    SpectrumResult { eigenvalues, eigenvectors, basis, cutoff }
}

/// Full spectrum at `cutoff`, checking the lowest `n_levels` against a run
/// at `cutoff + 2`.
pub fn diagonalize(h: &Hamiltonian, cutoff: u32, n_levels: usize) -> Result<SpectrumResult> {
    if h.is_interacting() {
        return Err(Error::Interacting);
    }
    if cutoff < 1 {
        return Err(Error::Invalid("cutoff must be at least 1".into()));
    }
    let s = solve(h, cutoff);
    if n_levels > s.eigenvalues.len() {
        return Err(Error::InsufficientSpectrum { needed: n_levels, available: s.eigenvalues.len() });
    }
    if n_levels > 0 {
        let big = solve(h, cutoff + 2);
        let shift = (s.eigenvalues[n_levels - 1] - big.eigenvalues[n_levels - 1]).abs();
        if shift > CONVERGENCE_TOL {
            return Err(Error::BasisTooSmall { shift });
        }
    }
    Ok(s)
}

/// Aufbau filling of each spin sector.
pub fn ground_state_energy(s: &SpectrumResult, n_up: usize, n_down: usize) -> Result<f64> {
    let need = n_up.max(n_down);
    if need > s.eigenvalues.len() {
        return Err(Error::InsufficientSpectrum { needed: need, available: s.eigenvalues.len() });
    }
    Ok(s.eigenvalues[..n_up].iter().sum::<f64>() + s.eigenvalues[..n_down].iter().sum::<f64>())
}

/// Whether the filling leaves a partially occupied degenerate level.
pub fn is_degenerate(s: &SpectrumResult, n_up: usize, n_down: usize) -> bool {
    [n_up, n_down].iter().any(|&n| {
        n > 0 && n < s.eigenvalues.len() && s.eigenvalues[n] - s.eigenvalues[n - 1] < DEGENERACY_GAP
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactAnsatz {
    pub ansatz: Ansatz,
    pub degenerate: bool,
}

/// Ansatz whose orbitals are the lowest eigenvectors, expressed in `target`
/// (the spectrum's own basis when `None`).
pub fn exact_ansatz(
    s: &SpectrumResult,
    h: &Hamiltonian,
    n_up: usize,
    n_down: usize,
    target: Option<&PlaneWaveBasis>,
) -> Result<ExactAnsatz> {
    let need = n_up.max(n_down);
    if need > s.eigenvalues.len() {
        return Err(Error::InsufficientSpectrum { needed: need, available: s.eigenvalues.len() });
    }
    let basis = target.cloned().unwrap_or_else(|| s.basis.clone());
    let nb = basis.len();
    let mut map = Vec::with_capacity(s.basis.len());
    for f in s.basis.functions() {
        let i = basis
            .index_of(f)
            .ok_or_else(|| Error::BasisMismatch(alloc::format!("{f:?} is not in the ansatz basis")))?;
        let norm = if *f == BasisFunction::Constant { 1.0 } else { SQRT_2 };
        map.push((i, norm));
    }
    let orbitals = |n: usize| {
        let mut c = vec![0.0; n * nb];
        for j in 0..n {
            for (a, &(i, norm)) in map.iter().enumerate() {
                c[j * nb + i] = s.eigenvectors[(a, j)] * norm;
            }
        }
        c
    };
    let ansatz = Ansatz::new(*h.cell(), basis, n_up, n_down, orbitals(n_up), orbitals(n_down), None)?;
    Ok(ExactAnsatz { ansatz, degenerate: is_degenerate(s, n_up, n_down) })
}
