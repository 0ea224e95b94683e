//! Fixtures and finite-difference oracles shared by unit tests.

use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{Ansatz, Wavefunction};
use crate::groups::Configuration;
use crate::lattice::{Cell, LatticeKind};

pub fn random_config(rng: &mut ChaCha8Rng, dim: usize, n_up: usize, n_down: usize) -> Configuration {
    let n = n_up + n_down;
    let pos: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    Configuration::with_counts(dim, pos, n_up).unwrap()
}

pub fn random_ansatz(cell: Cell, cutoff: u32, n_up: usize, n_down: usize, jastrow: bool, seed: u64) -> Ansatz {
    let mut a = Ansatz::initial(cell, cutoff, n_up, n_down, jastrow, 0.3, seed).unwrap();
    if jastrow {
        let mut p = a.params();
        let q = p.len();
        p[q - 2] = 0.3;
        p[q - 1] = -0.2;
        a.set_params(&p).unwrap();
    }
    a
}

pub fn square_cell() -> Cell {
    Cell::new(LatticeKind::Square, 3.0)
}

pub type ParamFn<'a> = dyn Fn(&[f64]) -> f64 + 'a;

/// Central-difference checks of `grad_x`, the Laplacian and `grad_params`.
///
/// The Laplacian uses differences of the analytic gradient, which is itself
/// checked against differences of `log|psi|` first.
pub fn check_derivatives<W: Wavefunction>(
    psi: &W,
    c: &Configuration,
    rel: f64,
    params: Option<&ParamFn<'_>>,
    theta: &[f64],
) {
    let h = 1e-5;
    let d = psi.dim();
    let n = c.n();
    let e = psi.evaluate(c).unwrap();
    assert!(!e.is_node());
    let kmet = psi.cell().kinetic_metric();
    let mut lap = 0.0;
    for i in 0..n {
        for a in 0..d {
            // fourth-order central stencil
            let shifted = |t: f64| {
                let mut cc = c.clone();
                cc.position_mut(i)[a] += t;
                psi.evaluate(&cc).unwrap()
            };
            let (p1, m1, p2, m2) = (shifted(h), shifted(-h), shifted(2.0 * h), shifted(-2.0 * h));
            let stencil = |f: &dyn Fn(&crate::ansatz::WavefunctionEval) -> f64| {
                (8.0 * (f(&p1) - f(&m1)) - (f(&p2) - f(&m2))) / (12.0 * h)
            };
            let fd = stencil(&|w| w.log_abs);
            let an = e.grad_x[i * d + a];
            assert!((fd - an).abs() <= rel * an.abs().max(1.0), "grad i={i} a={a}: {an} vs {fd}");
            for b in 0..d {
                let hess = stencil(&|w| w.grad_x[i * d + b]);
                lap += kmet[a][b] * (hess + e.grad_x[i * d + a] * e.grad_x[i * d + b]);
            }
        }
    }
    let an = e.laplacian_over_psi;
    assert!((lap - an).abs() <= rel * an.abs().max(1.0), "laplacian: {an} vs {lap}");
    if let Some(f) = params {
        for p in 0..theta.len() {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[p] += h;
            tm[p] -= h;
            let mut tp2 = theta.to_vec();
            let mut tm2 = theta.to_vec();
            tp2[p] += 2.0 * h;
            tm2[p] -= 2.0 * h;
            let fd = (8.0 * (f(&tp) - f(&tm)) - (f(&tp2) - f(&tm2))) / (12.0 * h);
            let an = e.grad_params[p];
            assert!((fd - an).abs() <= rel * an.abs().max(1.0), "param {p}: {an} vs {fd}");
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One Gaussian well at the origin of a chain of length `2 pi`.
pub fn well_chain() -> crate::hamiltonian::Hamiltonian {
    let cell = Cell::new(LatticeKind::Chain, 2.0 * core::f64::consts::PI);
    crate::hamiltonian::Hamiltonian::new(cell, vec![[0.0; 3]], 0.5, 0.8, 0.0, 0.0).unwrap()
}

/// Exact two-electron same-spin ground state of [`well_chain`].
pub fn well_chain_exact() -> (crate::hamiltonian::Hamiltonian, Ansatz, f64) {
    let h = well_chain();
    let s = crate::oracle::diagonalize(&h, 16, 2).unwrap();
    let e = crate::oracle::ground_state_energy(&s, 2, 0).unwrap();
    let a = crate::oracle::exact_ansatz(&s, &h, 2, 0, None).unwrap().ansatz;
    (h, a, e)
}
