//! Real plane-wave basis `{1, cos(2 pi k.x), sin(2 pi k.x)}` on the torus.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::groups::Isometry;
use crate::lattice::{Cell, LatticeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisFunction {
    Constant,
    Cos([i32; 3]),
    Sin([i32; 3]),
}

impl BasisFunction {
    pub fn wavevector(&self) -> [i32; 3] {
        match *self {
            BasisFunction::Constant => [0; 3],
            BasisFunction::Cos(k) | BasisFunction::Sin(k) => k,
        }
    }
}

/// Ordered set of real plane waves, closed under `k -> -k` by construction
/// (only one of `k`, `-k` is stored).
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    lattice: LatticeKind,
    functions: Vec<BasisFunction>,
    cos_index: BTreeMap<[i32; 3], usize>,
}

/// `k` lies in the stored half-space: its first nonzero entry is positive.
pub fn is_positive_half(k: &[i32; 3]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

fn reciprocal_norm2(lattice: LatticeKind, k: &[i32; 3]) -> f64 {
    let gi = lattice.inverse_metric();
    let d = lattice.dim();
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            s += k[a] as f64 * gi[a][b] * k[b] as f64;
        }
    }
    s
}

impl PlaneWaveBasis {
    /// All wavevectors with `k^T G^-1 k <= cutoff^2 k0^T G^-1 k0`, where `k0`
    /// is a shortest nonzero wavevector, ordered by length.
    ///
    /// The ball is closed under every lattice isometry.
    pub fn new(lattice: LatticeKind, cutoff: u32) -> Self {
        let d = lattice.dim();
        let c = cutoff as i32;
        let mut ks: Vec<([i32; 3], f64)> = Vec::new();
        let mut e1 = [0i32; 3];
        e1[0] = 1;
        let unit = reciprocal_norm2(lattice, &e1);
        let span = (2 * c + 1) as usize;
        for code in 0..span.pow(d as u32) {
            let mut k = [0i32; 3];
            let mut r = code;
            for a in 0..d {
                k[a] = (r % span) as i32 - c;
                r /= span;
            }
            if !is_positive_half(&k) {
                continue;
            }
            let n = reciprocal_norm2(lattice, &k);
            if n <= (cutoff * cutoff) as f64 * unit + 1e-9 {
                ks.push((k, n));
            }
        }
        ks.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let mut functions = vec![BasisFunction::Constant];
        for (k, _) in ks {
            functions.push(BasisFunction::Cos(k));
            functions.push(BasisFunction::Sin(k));
        }
        Self::from_functions(lattice, functions).expect("generated basis is well formed")
    }

    /// A basis from an explicit list. Every cosine must be followed by the
    /// sine of the same wavevector, and wavevectors must be in the positive
    /// half-space.
    pub fn from_functions(lattice: LatticeKind, functions: Vec<BasisFunction>) -> Result<Self> {
        let mut cos_index = BTreeMap::new();
        let mut i = 0;
        while i < functions.len() {
            match functions[i] {
                BasisFunction::Constant => i += 1,
                BasisFunction::Cos(k) => {
                    if !is_positive_half(&k) || functions.get(i + 1) != Some(&BasisFunction::Sin(k)) {
                        return Err(Error::BasisMismatch(alloc::format!("bad pair at {k:?}")));
                    }
                    if cos_index.insert(k, i).is_some() {
                        return Err(Error::BasisMismatch(alloc::format!("duplicate wavevector {k:?}")));
                    }
                    i += 2;
                }
                BasisFunction::Sin(k) => {
                    return Err(Error::BasisMismatch(alloc::format!("sine without cosine at {k:?}")));
                }
            }
        }
        Ok(PlaneWaveBasis { lattice, functions, cos_index })
    }

    pub fn lattice(&self) -> LatticeKind {
        self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn index_of(&self, f: &BasisFunction) -> Option<usize> {
        match f {
            BasisFunction::Constant => self.functions.iter().position(|g| *g == BasisFunction::Constant),
            BasisFunction::Cos(k) => self.cos_index.get(k).copied(),
            BasisFunction::Sin(k) => self.cos_index.get(k).map(|i| i + 1),
        }
    }

    /// `kappa_a` with `Laplacian f_a = -kappa_a f_a` in physical units.
    pub fn kinetic_factors(&self, cell: &Cell) -> Vec<f64> {
        self.functions.iter().map(|f| cell.reciprocal_norm2(&f.wavevector())).collect()
    }

    /// Values and lattice-coordinate gradients (`len x d`, row-major) at `x`.
    pub fn eval(&self, x: &[f64], values: &mut [f64], grads: &mut [f64]) {
        let d = self.dim();
        let mut i = 0;
        while i < self.functions.len() {
            match self.functions[i] {
                BasisFunction::Constant => {
                    values[i] = 1.0;
                    grads[i * d..(i + 1) * d].iter_mut().for_each(|g| *g = 0.0);
                    i += 1;
                }
                BasisFunction::Cos(k) => {
                    let phase = 2.0 * PI * (0..d).map(|a| k[a] as f64 * x[a]).sum::<f64>();
                    let (s, c) = phase.sin_cos();
                    values[i] = c;
                    values[i + 1] = s;
                    for a in 0..d {
                        let q = 2.0 * PI * k[a] as f64;
                        grads[i * d + a] = -q * s;
                        grads[(i + 1) * d + a] = q * c;
                    }
                    i += 2;
                }
                BasisFunction::Sin(_) => unreachable!("sine always follows its cosine"),
            }
        }
    }

    /// Values only.
    pub fn eval_values(&self, x: &[f64], values: &mut [f64]) {
        let d = self.dim();
        let mut i = 0;
        while i < self.functions.len() {
            match self.functions[i] {
                BasisFunction::Constant => {
                    values[i] = 1.0;
                    i += 1;
                }
                BasisFunction::Cos(k) => {
                    let phase = 2.0 * PI * (0..d).map(|a| k[a] as f64 * x[a]).sum::<f64>();
                    let (s, c) = phase.sin_cos();
                    values[i] = c;
                    values[i + 1] = s;
                    i += 2;
                }
                BasisFunction::Sin(_) => unreachable!("sine always follows its cosine"),
            }
        }
    }

    /// Coefficients of `f o g` where `f = sum_a c_a f_a`.
    pub fn pull_back(&self, g: &Isometry, c: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![0.0; self.len()];
        let mut i = 0;
        while i < self.functions.len() {
            match self.functions[i] {
                BasisFunction::Constant => {
                    out[i] += c[i];
                    i += 1;
                }
                BasisFunction::Cos(k) => {
                    // cos(2 pi k.(Ax + b)) = cos(2 pi k'.x + theta), k' = A^T k
                    let mut kp = g.pull_wavevector(&k);
                    let theta = 2.0 * PI * (0..d).map(|a| k[a] as f64 * g.translation_part()[a]).sum::<f64>();
                    let (st, ct) = theta.sin_cos();
                    let flip = if is_positive_half(&kp) {
                        1.0
                    } else {
                        for v in kp.iter_mut() {
                            *v = -*v;
                        }
                        -1.0
                    };
                    let j = *self.cos_index.get(&kp).ok_or_else(|| {
                        Error::BasisMismatch(alloc::format!("wavevector {kp:?} missing under the group action"))
                    })?;
                    let (a, b) = (c[i], c[i + 1]);
                    // a cos(u + t) + b sin(u + t) with sin(u) = flip * sin(u'')
                    out[j] += a * ct + b * st;
                    out[j + 1] += flip * (-a * st + b * ct);
                    i += 2;
                }
                BasisFunction::Sin(_) => unreachable!("sine always follows its cosine"),
            }
        }
        Ok(out)
    }
}
