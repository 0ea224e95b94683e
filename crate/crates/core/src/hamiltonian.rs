//! Model Hamiltonian: periodic Gaussian wells, a soft pair repulsion, and the
//! local energy `-1/2 Laplacian psi / psi + V`.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::Complex;

#[allow(unused_imports)]
use num_traits::Float;

use crate::ansatz::{Wavefunction, WavefunctionEval};
use crate::error::{Error, Result};
use crate::groups::{Configuration, SpaceGroup};
use crate::lattice::{min_image, Cell};

/// Number of periodic images kept on each side of the minimum image.
pub const IMAGE_CUTOFF: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    cell: Cell,
    /// Well centers in lattice coordinates.
    atoms: Vec<[f64; 3]>,
    /// Well depth `V0`; the well is `-V0 exp(-r^2 / (2 sigma^2))`.
    depth: f64,
    /// Well width `sigma` in physical units.
    width: f64,
    /// Pair strength `lambda_int`; zero means non-interacting.
    interaction: f64,
    /// Constant added to the one-body potential of every electron.
    offset: f64,
    shell: Vec<[i32; 3]>,
}

impl Hamiltonian {
    pub fn new(cell: Cell, atoms: Vec<[f64; 3]>, depth: f64, width: f64, interaction: f64, offset: f64) -> Result<Self> {
        if !(width > 0.0) && !atoms.is_empty() && depth != 0.0 {
            return Err(Error::Invalid(alloc::format!("well width must be positive, got {width}")));
        }
        if !(cell.scale > 0.0) {
            return Err(Error::Invalid(alloc::format!("cell scale must be positive, got {}", cell.scale)));
        }
        let shell = cell.lattice.reciprocal_shells(1).into_iter().next().unwrap_or_default();
        Ok(Hamiltonian { cell, atoms, depth, width, interaction, offset, shell })
    }

    pub fn free(cell: Cell) -> Self {
        Hamiltonian::new(cell, Vec::new(), 0.0, 1.0, 0.0, 0.0).expect("free Hamiltonian is valid")
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn atoms(&self) -> &[[f64; 3]] {
        &self.atoms
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn interaction(&self) -> f64 {
        self.interaction
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_interacting(&self) -> bool {
        self.interaction != 0.0
    }

    /// One-body potential at a single position.
    pub fn one_body(&self, x: &[f64]) -> f64 {
        let d = self.cell.dim();
        let mut v = self.offset;
        if self.depth == 0.0 {
            return v;
        }
        let inv = 1.0 / (2.0 * self.width * self.width);
        let span = (2 * IMAGE_CUTOFF + 1) as usize;
        for atom in &self.atoms {
            let mut delta = [0.0; 3];
            for a in 0..d {
                delta[a] = min_image(x[a] - atom[a]);
            }
            for code in 0..span.pow(d as u32) {
                let mut r = code;
                let mut dd = [0.0; 3];
                for a in 0..d {
                    dd[a] = delta[a] + ((r % span) as i32 - IMAGE_CUTOFF) as f64;
                    r /= span;
                }
                v -= self.depth * (-self.cell.physical_norm2(&dd[..d]) * inv).exp();
            }
        }
        v
    }

    /// Pair interaction between two positions.
    pub fn pair(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.interaction == 0.0 || self.shell.is_empty() {
            return 0.0;
        }
        let d = self.cell.dim();
        let s: f64 = self
            .shell
            .iter()
            .map(|k| 1.0 + (2.0 * PI * (0..d).map(|a| k[a] as f64 * (x[a] - y[a])).sum::<f64>()).cos())
            .sum();
        self.interaction * s / self.shell.len() as f64
    }

    /// Total potential `V(x)`.
    pub fn potential(&self, c: &Configuration) -> f64 {
        let n = c.n();
        let mut v = 0.0;
        for i in 0..n {
            v += self.one_body(c.position(i));
            for j in (i + 1)..n {
                v += self.pair(c.position(i), c.position(j));
            }
        }
        v
    }

    /// Fourier coefficient `V_k` of the one-body potential,
    /// `v(x) = sum_k V_k exp(2 pi i k.x)`, with the image sum taken to infinity.
    pub fn fourier(&self, k: &[i32; 3]) -> Complex<f64> {
        let d = self.cell.dim();
        let mut out = Complex::new(if k.iter().all(|&c| c == 0) { self.offset } else { 0.0 }, 0.0);
        if self.depth == 0.0 {
            return out;
        }
        let q2 = self.cell.reciprocal_norm2(k);
        let s2 = self.width * self.width;
        let amp = -self.depth * (2.0 * PI * s2).powf(d as f64 / 2.0) / self.cell.volume() * (-0.5 * s2 * q2).exp();
        for atom in &self.atoms {
            let phase = -2.0 * PI * (0..d).map(|a| k[a] as f64 * atom[a]).sum::<f64>();
            out += Complex::new(amp * phase.cos(), amp * phase.sin());
        }
        out
    }

    /// Largest `|V(g(x)) - V(x)|` over the group and the given configurations.
    pub fn invariance_defect(&self, group: &SpaceGroup, configs: &[Configuration]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in configs {
            let v = self.potential(c);
            for g in group.elements() {
                let gc = crate::groups::apply_diagonal(g, c)?;
                worst = worst.max((self.potential(&gc) - v).abs());
            }
        }
        Ok(worst)
    }
}

/// `E_local = -1/2 Laplacian psi / psi + V` from a finished evaluation.
pub fn local_energy_from_eval(h: &Hamiltonian, eval: &WavefunctionEval, c: &Configuration) -> Result<f64> {
    if eval.is_node() {
        return Err(Error::Node);
    }
    Ok(-0.5 * eval.laplacian_over_psi + h.potential(c))
}

pub fn local_energy<W: Wavefunction + ?Sized>(h: &Hamiltonian, psi: &W, c: &Configuration) -> Result<f64> {
    let e = psi.evaluate(c)?;
    local_energy_from_eval(h, &e, c)
}
