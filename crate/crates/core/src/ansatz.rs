//! Slater-Jastrow plane-wave ansatz and the [`Wavefunction`] interface.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use num_traits::Float;

use crate::basis::PlaneWaveBasis;
use crate::error::{Error, Result};
use crate::groups::{Configuration, SpaceGroup, Spin};
use crate::lattice::{bilinear, Cell, Mat3};

/// Orbital matrices whose scaled condition number exceeds this are nodes.
pub const NODE_CONDITION: f64 = 1e12;

/// Value and derivatives of a wavefunction at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionEval {
    pub log_abs: f64,
    /// `1.0`, `-1.0`, or `0.0` at a node.
    pub sign: f64,
    /// `d log|psi| / dx`, `n x d` row-major, lattice coordinates.
    pub grad_x: Vec<f64>,
    /// `Laplacian psi / psi` in physical units.
    pub laplacian_over_psi: f64,
    /// `d log|psi| / d theta`.
    pub grad_params: Vec<f64>,
}

impl WavefunctionEval {
    pub fn node(n_coords: usize, n_params: usize) -> Self {
        WavefunctionEval {
            log_abs: f64::NEG_INFINITY,
            sign: 0.0,
            grad_x: vec![0.0; n_coords],
            laplacian_over_psi: 0.0,
            grad_params: vec![0.0; n_params],
        }
    }

    pub fn is_node(&self) -> bool {
        self.sign == 0.0
    }
}

/// Anything that can be sampled and differentiated like a wavefunction.
pub trait Wavefunction: Sync {
    fn cell(&self) -> &Cell;
    fn n_electrons(&self) -> usize;
    fn n_params(&self) -> usize;
    /// Full evaluation. Nodes are reported through `sign == 0`.
    fn evaluate(&self, c: &Configuration) -> Result<WavefunctionEval>;
    /// `(log|psi|, sign)` without derivatives.
    fn value(&self, c: &Configuration) -> Result<(f64, f64)> {
        let e = self.evaluate(c)?;
        Ok((e.log_abs, e.sign))
    }
    fn dim(&self) -> usize {
        self.cell().dim()
    }
}

impl<W: Wavefunction + ?Sized> Wavefunction for &W {
    fn cell(&self) -> &Cell {
        (**self).cell()
    }
    fn n_electrons(&self) -> usize {
        (**self).n_electrons()
    }
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn evaluate(&self, c: &Configuration) -> Result<WavefunctionEval> {
        (**self).evaluate(c)
    }
    fn value(&self, c: &Configuration) -> Result<(f64, f64)> {
        (**self).value(c)
    }
}

/// Pair factor `J = sum_{i<j} [a S1(x_i - x_j) + b S2(x_i - x_j)]` where `S1`,
/// `S2` are cosine sums over the two shortest reciprocal shells.
#[derive(Debug, Clone, PartialEq)]
pub struct Jastrow {
    pub a: f64,
    pub b: f64,
    shells: [Vec<[i32; 3]>; 2],
    kappa: [Vec<f64>; 2],
}

impl Jastrow {
    pub fn new(cell: &Cell, a: f64, b: f64) -> Self {
        let mut s = cell.lattice.reciprocal_shells(2).into_iter();
        let s1 = s.next().unwrap_or_default();
        let s2 = s.next().unwrap_or_default();
        let k1 = s1.iter().map(|k| cell.reciprocal_norm2(k)).collect();
        let k2 = s2.iter().map(|k| cell.reciprocal_norm2(k)).collect();
        Jastrow { a, b, shells: [s1, s2], kappa: [k1, k2] }
    }

    /// `(u, grad u, laplacian u, du/da, du/db)` at displacement `delta`.
    fn pair(&self, delta: &[f64], d: usize) -> (f64, [f64; 3], f64, f64, f64) {
        let mut u = 0.0;
        let mut grad = [0.0; 3];
        let mut lap = 0.0;
        let mut parts = [0.0; 2];
        for (s, coef) in [self.a, self.b].into_iter().enumerate() {
            for (k, kap) in self.shells[s].iter().zip(&self.kappa[s]) {
                let phase = 2.0 * PI * (0..d).map(|a| k[a] as f64 * delta[a]).sum::<f64>();
                let (sn, cs) = phase.sin_cos();
                parts[s] += cs;
                u += coef * cs;
                lap -= coef * kap * cs;
                for a in 0..d {
                    grad[a] -= coef * 2.0 * PI * k[a] as f64 * sn;
                }
            }
        }
        (u, grad, lap, parts[0], parts[1])
    }
}

/// Real Slater-Jastrow wavefunction over a plane-wave basis.
///
/// Parameters are laid out as `[C_up (n_up x nb), C_down (n_down x nb), a, b]`,
/// the last two only when the Jastrow factor is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    cell: Cell,
    basis: PlaneWaveBasis,
    kappa: Vec<f64>,
    n_up: usize,
    n_down: usize,
    coeffs: Vec<f64>,
    jastrow: Option<Jastrow>,
}

struct SectorEval {
    log_abs: f64,
    sign: f64,
    /// `Minv`, `n x n` row-major, indexed `[orbital][electron]`.
    minv: Vec<f64>,
}

impl Ansatz {
    /// Builds an ansatz from explicit orbital coefficients (`n_s x nb` each).
    pub fn new(
        cell: Cell,
        basis: PlaneWaveBasis,
        n_up: usize,
        n_down: usize,
        coeffs_up: Vec<f64>,
        coeffs_down: Vec<f64>,
        jastrow: Option<(f64, f64)>,
    ) -> Result<Self> {
        if basis.lattice() != cell.lattice {
            return Err(Error::BasisMismatch("basis and cell lattices differ".into()));
        }
        let nb = basis.len();
        if coeffs_up.len() != n_up * nb || coeffs_down.len() != n_down * nb {
            return Err(Error::DimensionMismatch {
                expected: (n_up + n_down) * nb,
                got: coeffs_up.len() + coeffs_down.len(),
            });
        }
        if n_up + n_down == 0 {
            return Err(Error::Invalid("ansatz needs at least one electron".into()));
        }
        if n_up > nb || n_down > nb {
            return Err(Error::BasisMismatch(alloc::format!("{nb} basis functions cannot hold {n_up}+{n_down} orbitals")));
        }
        let mut coeffs = coeffs_up;
        coeffs.extend(coeffs_down);
        let kappa = basis.kinetic_factors(&cell);
        let jastrow = jastrow.map(|(a, b)| Jastrow::new(&cell, a, b));
        Ok(Ansatz { cell, basis, kappa, n_up, n_down, coeffs, jastrow })
    }

    /// Lowest free-particle orbitals plus Gaussian noise of size `noise`.
    pub fn initial(
        cell: Cell,
        cutoff: u32,
        n_up: usize,
        n_down: usize,
        jastrow: bool,
        noise: f64,
        seed: u64,
    ) -> Result<Self> {
        let basis = PlaneWaveBasis::new(cell.lattice, cutoff);
        let nb = basis.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sector = |n: usize| {
            let mut c = vec![0.0; n * nb];
            for j in 0..n.min(nb) {
                c[j * nb + j] = 1.0;
            }
            for v in c.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise * z;
            }
            c
        };
        let up = sector(n_up);
        let down = sector(n_down);
        Ansatz::new(cell, basis, n_up, n_down, up, down, jastrow.then_some((0.0, 0.0)))
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn has_jastrow(&self) -> bool {
        self.jastrow.is_some()
    }

    pub fn jastrow(&self) -> Option<&Jastrow> {
        self.jastrow.as_ref()
    }

    /// Orbital coefficients of one sector (`n_s x nb`, row-major).
    pub fn coefficients(&self, spin: Spin) -> &[f64] {
        let nb = self.basis.len();
        match spin {
            Spin::Up => &self.coeffs[..self.n_up * nb],
            Spin::Down => &self.coeffs[self.n_up * nb..],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.coeffs.clone();
        if let Some(j) = &self.jastrow {
            p.push(j.a);
            p.push(j.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: p.len() });
        }
        let nc = self.coeffs.len();
        self.coeffs.copy_from_slice(&p[..nc]);
        if let Some(j) = &mut self.jastrow {
            j.a = p[nc];
            j.b = p[nc + 1];
        }
        Ok(())
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let mut a = self.clone();
        a.set_params(p)?;
        Ok(a)
    }

    fn check(&self, c: &Configuration) -> Result<()> {
        if c.dim() != self.cell.dim() {
            return Err(Error::DimensionMismatch { expected: self.cell.dim(), got: c.dim() });
        }
        if c.n() != self.n_up + self.n_down || c.count(Spin::Up) != self.n_up {
            return Err(Error::ElectronCount { expected: self.n_up + self.n_down, got: c.n() });
        }
        Ok(())
    }

    fn sector_electrons(c: &Configuration, spin: Spin) -> Vec<usize> {
        (0..c.n()).filter(|&i| c.spin(i) == spin).collect()
    }

    /// Orbital matrix `M[i][j] = phi_j(x_i)` of one sector plus basis values.
    fn sector_matrix(&self, c: &Configuration, spin: Spin, idx: &[usize], fvals: &mut Vec<f64>) -> DMatrix<f64> {
        let nb = self.basis.len();
        let n = idx.len();
        let coeffs = self.coefficients(spin);
        fvals.resize(n * nb, 0.0);
        for (r, &i) in idx.iter().enumerate() {
            self.basis.eval_values(c.position(i), &mut fvals[r * nb..(r + 1) * nb]);
        }
        DMatrix::from_fn(n, n, |i, j| (0..nb).map(|a| coeffs[j * nb + a] * fvals[i * nb + a]).sum())
    }

    fn factor(&self, m: DMatrix<f64>, spin: Spin) -> Option<SectorEval> {
        let n = m.nrows();
        if n == 0 {
            return Some(SectorEval { log_abs: 0.0, sign: 1.0, minv: Vec::new() });
        }
        let nb = self.basis.len();
        let coeffs = self.coefficients(spin);
        // column scaling so overall orbital normalization does not matter
        let scale: Vec<f64> = (0..n).map(|j| coeffs[j * nb..(j + 1) * nb].iter().map(|v| v.abs()).sum()).collect();
        if scale.iter().any(|&s| !(s > 0.0)) {
            return None;
        }
        let mut norm_m: f64 = 0.0;
        for j in 0..n {
            norm_m = norm_m.max((0..n).map(|i| m[(i, j)].abs()).sum::<f64>() / scale[j]);
        }
        let lu = m.lu();
        let mut log_abs = 0.0;
        let mut sign: f64 = lu.p().determinant();
        {
            let u = lu.u();
            for i in 0..n {
                let v = u[(i, i)];
                if v == 0.0 || !v.is_finite() {
                    return None;
                }
                log_abs += v.abs().ln();
                if v < 0.0 {
                    sign = -sign;
                }
            }
        }
        let inv = lu.try_inverse()?;
        let mut norm_inv: f64 = 0.0;
        for j in 0..n {
            norm_inv = norm_inv.max((0..n).map(|i| (inv[(i, j)] * scale[i]).abs()).sum::<f64>());
        }
        if !(norm_inv.max(norm_m * norm_inv) <= NODE_CONDITION) {
            return None;
        }
        let mut minv = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                minv[j * n + i] = inv[(j, i)];
            }
        }
        Some(SectorEval { log_abs, sign, minv })
    }

    fn jastrow_value(&self, c: &Configuration) -> f64 {
        let Some(jas) = &self.jastrow else { return 0.0 };
        let d = c.dim();
        let mut total = 0.0;
        let mut delta = [0.0; 3];
        for i in 0..c.n() {
            for j in (i + 1)..c.n() {
                for a in 0..d {
                    delta[a] = c.position(i)[a] - c.position(j)[a];
                }
                total += jas.pair(&delta, d).0;
            }
        }
        total
    }
}

impl Wavefunction for Ansatz {
    fn cell(&self) -> &Cell {
        &self.cell
    }

    fn n_electrons(&self) -> usize {
        self.n_up + self.n_down
    }

    fn n_params(&self) -> usize {
        self.coeffs.len() + if self.jastrow.is_some() { 2 } else { 0 }
    }

    fn value(&self, c: &Configuration) -> Result<(f64, f64)> {
        self.check(c)?;
        let mut fvals = Vec::new();
        let mut log_abs = 0.0;
        let mut sign = 1.0;
        for spin in [Spin::Up, Spin::Down] {
            let idx = Self::sector_electrons(c, spin);
            let m = self.sector_matrix(c, spin, &idx, &mut fvals);
            match self.factor(m, spin) {
                Some(s) => {
                    log_abs += s.log_abs;
                    sign *= s.sign;
                }
                None => return Ok((f64::NEG_INFINITY, 0.0)),
            }
        }
        Ok((log_abs + self.jastrow_value(c), sign))
    }

    fn evaluate(&self, c: &Configuration) -> Result<WavefunctionEval> {
        self.check(c)?;
        let d = self.cell.dim();
        let n = c.n();
        let nb = self.basis.len();
        let kmet: Mat3 = self.cell.kinetic_metric();
        let mut out = WavefunctionEval {
            log_abs: 0.0,
            sign: 1.0,
            grad_x: vec![0.0; n * d],
            laplacian_over_psi: 0.0,
            grad_params: vec![0.0; self.n_params()],
        };
        // per-electron determinant gradient and Laplacian ratio
        let mut det_lap = vec![0.0; n];
        let mut fvals = Vec::new();
        let mut fgrads = vec![0.0; nb * d];
        let mut offset = 0;
        for spin in [Spin::Up, Spin::Down] {
            let idx = Self::sector_electrons(c, spin);
            let ns = idx.len();
            let m = self.sector_matrix(c, spin, &idx, &mut fvals);
            let Some(sec) = self.factor(m, spin) else {
                return Ok(WavefunctionEval::node(n * d, self.n_params()));
            };
            out.log_abs += sec.log_abs;
            out.sign *= sec.sign;
            let coeffs = self.coefficients(spin);
            let mut fv = vec![0.0; nb];
            for (r, &i) in idx.iter().enumerate() {
                self.basis.eval(c.position(i), &mut fv, &mut fgrads);
                for j in 0..ns {
                    let w = sec.minv[j * ns + r];
                    let cj = &coeffs[j * nb..(j + 1) * nb];
                    let mut lap = 0.0;
                    for a in 0..nb {
                        let ca = cj[a];
                        if ca == 0.0 {
                            continue;
                        }
                        lap -= ca * self.kappa[a] * fv[a];
                        for x in 0..d {
                            out.grad_x[i * d + x] += w * ca * fgrads[a * d + x];
                        }
                    }
                    det_lap[i] += w * lap;
                    // d log D / d C_ja = sum_i f_a(x_i) Minv_ji
                    let gp = &mut out.grad_params[offset + j * nb..offset + (j + 1) * nb];
                    for a in 0..nb {
                        gp[a] += w * fv[a];
                    }
                }
            }
            offset += ns * nb;
        }
        let mut jgrad = vec![0.0; n * d];
        let mut jlap = vec![0.0; n];
        if let Some(jas) = &self.jastrow {
            let mut delta = [0.0; 3];
            let (mut da, mut db) = (0.0, 0.0);
            for i in 0..n {
                for j in (i + 1)..n {
                    for a in 0..d {
                        delta[a] = c.position(i)[a] - c.position(j)[a];
                    }
                    let (u, g, l, pa, pb) = jas.pair(&delta, d);
                    out.log_abs += u;
                    da += pa;
                    db += pb;
                    for a in 0..d {
                        jgrad[i * d + a] += g[a];
                        jgrad[j * d + a] -= g[a];
                    }
                    jlap[i] += l;
                    jlap[j] += l;
                }
            }
            let q = self.n_params();
            out.grad_params[q - 2] = da;
            out.grad_params[q - 1] = db;
        }
        let mut lap_total = 0.0;
        for i in 0..n {
            let gd = &out.grad_x[i * d..(i + 1) * d];
            let gj = &jgrad[i * d..(i + 1) * d];
            lap_total += det_lap[i] + jlap[i] + bilinear(&kmet, gj, gj, d) + 2.0 * bilinear(&kmet, gd, gj, d);
        }
        for (g, j) in out.grad_x.iter_mut().zip(&jgrad) {
            *g += j;
        }
        out.laplacian_over_psi = lap_total;
        Ok(out)
    }
}

/// Adds a perturbation with vanishing group average to one orbital.
///
/// The perturbation `eta = phi - P phi` is built at the coefficient level,
/// where `P` projects onto the symmetry type that the remaining orbitals
/// require. Every other orbital must transform under the group into plus or
/// minus itself, and the Jastrow factor is invariant, so the group average of
/// the added determinant vanishes identically.
pub fn perturb_asymmetric(a: &Ansatz, group: &SpaceGroup, magnitude: f64, seed: u64) -> Result<Ansatz> {
    if !(magnitude >= 0.0) {
        return Err(Error::Invalid(alloc::format!("magnitude must be nonnegative, got {magnitude}")));
    }
    if magnitude == 0.0 {
        return Ok(a.clone());
    }
    let nb = a.basis.len();
    let target_spin = if a.n_up > 0 { Spin::Up } else { Spin::Down };
    // character chi(g) = product of the other orbitals' signs under g
    let mut chi = vec![1.0; group.order()];
    for spin in [Spin::Up, Spin::Down] {
        let coeffs = a.coefficients(spin);
        let ns = coeffs.len() / nb;
        for j in 0..ns {
            if spin == target_spin && j == 0 {
                continue;
            }
            let cj = &coeffs[j * nb..(j + 1) * nb];
            let scale = cj.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (e, g) in group.elements().iter().enumerate() {
                let pc = a.basis.pull_back(g, cj)?;
                let plus = pc.iter().zip(cj).all(|(x, y)| (x - y).abs() <= 1e-9 * scale);
                let minus = pc.iter().zip(cj).all(|(x, y)| (x + y).abs() <= 1e-9 * scale);
                if plus {
                } else if minus {
                    chi[e] = -chi[e];
                } else {
                    return Err(Error::NotInvariant(alloc::format!(
                        "orbital {j} is not an eigenfunction of group element {e}"
                    )));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: Vec<f64> = (0..nb).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut proj = vec![0.0; nb];
    for (e, g) in group.elements().iter().enumerate() {
        let pc = a.basis.pull_back(g, &phi)?;
        for (p, v) in proj.iter_mut().zip(pc) {
            *p += chi[e] * v / group.order() as f64;
        }
    }
    let eta: Vec<f64> = phi.iter().zip(&proj).map(|(p, q)| p - q).collect();
    let eta_norm = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = a.clone();
    if eta_norm < 1e-12 {
        return Ok(out);
    }
    let offset = if target_spin == Spin::Up { 0 } else { a.n_up * nb };
    let c0 = &mut out.coeffs[offset..offset + nb];
    let c_norm = c0.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for (c, e) in c0.iter_mut().zip(&eta) {
        *c += magnitude * c_norm * e / eta_norm;
    }
    Ok(out)
}
