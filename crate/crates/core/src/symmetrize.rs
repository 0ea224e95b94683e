//! Group averaging (GA, GAs, PA), data augmentation draws, and smoothed
//! canonicalization (SC, PC).

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::index::sample;
use rand::Rng;

use crate::ansatz::{Wavefunction, WavefunctionEval};
use crate::error::{Error, Result};
use crate::groups::{apply_diagonal, Configuration, Isometry, SpaceGroup};
use crate::lattice::{bilinear, Cell};
use crate::rng::child_rng;
use crate::smoothing::{boundary_set, lambda_eps_derivs, FundamentalRegion, SmoothingSpec};

/// Averages whose total is below this fraction of the summed magnitudes are
/// treated as nodes.
pub const CANCELLATION_TOL: f64 = 1e-14;

/// `psi^G(x) = (1/|G|) sum_g psi(g(x))` over an ordered list of isometries.
#[derive(Debug, Clone)]
pub struct GroupAveraged<'a, W: ?Sized> {
    base: &'a W,
    elements: Vec<Isometry>,
}

impl<'a, W: Wavefunction + ?Sized> GroupAveraged<'a, W> {
    pub fn new(base: &'a W, elements: Vec<Isometry>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(g) = elements.iter().find(|g| g.dim() != base.dim()) {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: g.dim() });
        }
        Ok(GroupAveraged { base, elements })
    }

    /// Average over the elements of `group` at `indices`.
    pub fn from_group(base: &'a W, group: &SpaceGroup, indices: &[usize]) -> Result<Self> {
        GroupAveraged::new(base, group.subset(indices)?)
    }

    pub fn full(base: &'a W, group: &SpaceGroup) -> Result<Self> {
        GroupAveraged::new(base, group.elements().to_vec())
    }

    pub fn elements(&self) -> &[Isometry] {
        &self.elements
    }

    pub fn base(&self) -> &W {
        self.base
    }
}

/// Signed log-sum-exp: `(l_max, sum_i s_i exp(l_i - l_max), sum_i |...|)`.
fn signed_sum(terms: &[(f64, f64)]) -> (f64, f64, f64) {
    let lmax = terms.iter().filter(|t| t.1 != 0.0).map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    if lmax == f64::NEG_INFINITY {
        return (lmax, 0.0, 0.0);
    }
    let mut s = 0.0;
    let mut a = 0.0;
    for &(l, sg) in terms {
        if sg != 0.0 {
            let r = (l - lmax).exp();
            s += sg * r;
            a += r;
        }
    }
    (lmax, s, a)
}

fn cancelled(s: f64, a: f64) -> bool {
    s == 0.0 || s.abs() <= CANCELLATION_TOL * a
}

impl<W: Wavefunction + ?Sized> Wavefunction for GroupAveraged<'_, W> {
    fn cell(&self) -> &Cell {
        self.base.cell()
    }

    fn n_electrons(&self) -> usize {
        self.base.n_electrons()
    }

    fn n_params(&self) -> usize {
        self.base.n_params()
    }

    fn value(&self, c: &Configuration) -> Result<(f64, f64)> {
        let mut terms = Vec::with_capacity(self.elements.len());
        for g in &self.elements {
            terms.push(self.base.value(&apply_diagonal(g, c)?)?);
        }
        let (lmax, s, a) = signed_sum(&terms);
        if cancelled(s, a) {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        Ok((lmax + s.abs().ln() - (self.elements.len() as f64).ln(), s.signum()))
    }

    fn evaluate(&self, c: &Configuration) -> Result<WavefunctionEval> {
        let d = self.dim();
        let n = c.n();
        let mut evals = Vec::with_capacity(self.elements.len());
        for g in &self.elements {
            evals.push(self.base.evaluate(&apply_diagonal(g, c)?)?);
        }
        let terms: Vec<(f64, f64)> = evals.iter().map(|e| (e.log_abs, e.sign)).collect();
        let (lmax, s, a) = signed_sum(&terms);
        if cancelled(s, a) {
            return Ok(WavefunctionEval::node(n * d, self.n_params()));
        }
        let mut out = WavefunctionEval {
            log_abs: lmax + s.abs().ln() - (self.elements.len() as f64).ln(),
            sign: s.signum(),
            grad_x: vec![0.0; n * d],
            laplacian_over_psi: 0.0,
            grad_params: vec![0.0; self.n_params()],
        };
        let mut rot = [0.0; 3];
        for (g, e) in self.elements.iter().zip(&evals) {
            if e.is_node() {
                continue;
            }
            let w = e.sign * (e.log_abs - lmax).exp() / s;
            for i in 0..n {
                g.rotate_transpose(&e.grad_x[i * d..(i + 1) * d], &mut rot);
                for x in 0..d {
                    out.grad_x[i * d + x] += w * rot[x];
                }
            }
            out.laplacian_over_psi += w * e.laplacian_over_psi;
            for (o, v) in out.grad_params.iter_mut().zip(&e.grad_params) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

/// One uniform draw from `group`, applied diagonally.
pub fn da_transform<R: Rng + ?Sized>(group: &SpaceGroup, c: &Configuration, rng: &mut R) -> Result<Configuration> {
    let i = rng.random_range(0..group.order());
    apply_diagonal(&group.elements()[i], c)
}

/// Indices of a uniform size-`k` subsample without replacement, fixed by
/// `(seed, step)`.
pub fn gas_subsample_indices(group: &SpaceGroup, k: usize, step: u64, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > group.order() {
        return Err(Error::SubsampleSize { k, order: group.order() });
    }
    let mut rng = child_rng(seed, step);
    Ok(sample(&mut rng, group.order(), k).into_vec())
}

pub fn gas_subsample(group: &SpaceGroup, k: usize, step: u64, seed: u64) -> Result<Vec<Isometry>> {
    group.subset(&gas_subsample_indices(group, k, step, seed)?)
}

/// Smoothed canonicalization
/// `psi^SC(x) = (1/n) sum_k sum_{h in G_eps(x_k)} w_h(x_k) psi(h(x))`.
#[derive(Debug, Clone)]
pub struct SmoothedCanonical<'a, W: ?Sized> {
    base: &'a W,
    group: SpaceGroup,
    region: FundamentalRegion,
    spec: SmoothingSpec,
}

impl<'a, W: Wavefunction + ?Sized> SmoothedCanonical<'a, W> {
    pub fn new(base: &'a W, group: SpaceGroup, region: FundamentalRegion, spec: SmoothingSpec) -> Result<Self> {
        if group.dim() != base.dim() || region.dim() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: group.dim().max(region.dim()) });
        }
        let inradius = region.inradius();
        if !(spec.epsilon < inradius) {
            return Err(Error::EpsilonTooLarge { epsilon: spec.epsilon, inradius });
        }
        Ok(SmoothedCanonical { base, group, region, spec })
    }

    pub fn spec(&self) -> &SmoothingSpec {
        &self.spec
    }
}

/// Weight of one extended element and its derivatives in electron `k`'s
/// coordinates.
struct WeightTerm {
    element: usize,
    w: f64,
    grad: [f64; 3],
    lap: f64,
}

impl<W: Wavefunction + ?Sized> SmoothedCanonical<'_, W> {
    fn weights(&self, x: &[f64]) -> Result<Vec<WeightTerm>> {
        let d = self.dim();
        let kmet = self.cell().kinetic_metric();
        let bw = boundary_set(&self.region, &self.spec, &self.group, x)?;
        let mut raw = Vec::with_capacity(bw.members.len());
        let (mut z, mut gz, mut lz) = (0.0, [0.0; 3], 0.0);
        for m in &bw.members {
            let mut y = [0.0; 3];
            m.map.apply(x, &mut y);
            let dd = self.region.distance_derivs(self.spec.kind, &y);
            let [lam, l1, l2] = lambda_eps_derivs(&self.spec, dd.value);
            let mut g = [0.0; 3];
            m.map.rotate_transpose(&dd.grad, &mut g);
            for v in g.iter_mut() {
                *v *= l1;
            }
            // trace(K (l2 dd^T + l1 H)) is unchanged by the rotation
            let mut lap = l2 * bilinear(&kmet, &dd.grad, &dd.grad, d);
            for a in 0..d {
                for b in 0..d {
                    lap += l1 * kmet[a][b] * dd.hess[a][b];
                }
            }
            z += lam;
            for a in 0..d {
                gz[a] += g[a];
            }
            lz += lap;
            raw.push((m.element, lam, g, lap));
        }
        if !(z > 0.0) {
            return Err(Error::EmptyBoundarySet);
        }
        let gz2 = bilinear(&kmet, &gz, &gz, d);
        Ok(raw
            .into_iter()
            .map(|(element, lam, g, lap)| {
                let mut grad = [0.0; 3];
                for a in 0..d {
                    grad[a] = g[a] / z - lam * gz[a] / (z * z);
                }
                let lap = lap / z - 2.0 * bilinear(&kmet, &g, &gz, d) / (z * z) - lam * lz / (z * z)
                    + 2.0 * lam * gz2 / (z * z * z);
                WeightTerm { element, w: lam / z, grad, lap }
            })
            .collect())
    }
}

impl<W: Wavefunction + ?Sized> Wavefunction for SmoothedCanonical<'_, W> {
    fn cell(&self) -> &Cell {
        self.base.cell()
    }

    fn n_electrons(&self) -> usize {
        self.base.n_electrons()
    }

    fn n_params(&self) -> usize {
        self.base.n_params()
    }

    fn value(&self, c: &Configuration) -> Result<(f64, f64)> {
        let n = c.n();
        let mut cache: Vec<Option<(f64, f64)>> = vec![None; self.group.order()];
        let mut terms = Vec::new();
        for k in 0..n {
            for t in self.weights(c.position(k))? {
                if t.w == 0.0 {
                    continue;
                }
                let v = match cache[t.element] {
                    Some(v) => v,
                    None => {
                        let v = self.base.value(&apply_diagonal(&self.group.elements()[t.element], c)?)?;
                        cache[t.element] = Some(v);
                        v
                    }
                };
                terms.push((v.0 + t.w.ln(), v.1));
            }
        }
        let (lmax, s, a) = signed_sum(&terms);
        if cancelled(s, a) {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        Ok((lmax + s.abs().ln() - (n as f64).ln(), s.signum()))
    }

    fn evaluate(&self, c: &Configuration) -> Result<WavefunctionEval> {
        let d = self.dim();
        let n = c.n();
        let q = self.n_params();
        let kmet = self.cell().kinetic_metric();
        let mut cache: Vec<Option<WavefunctionEval>> = vec![None; self.group.order()];
        let mut per_k = Vec::with_capacity(n);
        for k in 0..n {
            let ws = self.weights(c.position(k))?;
            for t in &ws {
                if cache[t.element].is_none() {
                    let g = &self.group.elements()[t.element];
                    cache[t.element] = Some(self.base.evaluate(&apply_diagonal(g, c)?)?);
                }
            }
            per_k.push(ws);
        }
        let lmax = cache
            .iter()
            .flatten()
            .filter(|e| !e.is_node())
            .map(|e| e.log_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        if lmax == f64::NEG_INFINITY {
            return Ok(WavefunctionEval::node(n * d, q));
        }
        let ratio: Vec<f64> = cache
            .iter()
            .map(|e| match e {
                Some(e) if !e.is_node() => e.sign * (e.log_abs - lmax).exp(),
                _ => 0.0,
            })
            .collect();
        // rotated base gradients, cached per element
        let rotated: Vec<Option<Vec<f64>>> = cache
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.as_ref().map(|e| {
                    let g = &self.group.elements()[i];
                    let mut out = vec![0.0; n * d];
                    for j in 0..n {
                        g.rotate_transpose(&e.grad_x[j * d..(j + 1) * d], &mut out[j * d..(j + 1) * d]);
                    }
                    out
                })
            })
            .collect();
        let mut s = 0.0;
        let mut a = 0.0;
        let mut grad = vec![0.0; n * d];
        let mut lap = 0.0;
        let mut gp = vec![0.0; q];
        for (k, ws) in per_k.iter().enumerate() {
            for t in ws {
                let r = ratio[t.element];
                if r == 0.0 {
                    continue;
                }
                let e = cache[t.element].as_ref().unwrap();
                let rg = rotated[t.element].as_ref().unwrap();
                s += t.w * r;
                a += t.w * r.abs();
                for j in 0..n * d {
                    grad[j] += t.w * r * rg[j];
                }
                for x in 0..d {
                    grad[k * d + x] += t.grad[x] * r;
                }
                lap += r
                    * (t.lap + 2.0 * bilinear(&kmet, &t.grad, &rg[k * d..(k + 1) * d], d) + t.w * e.laplacian_over_psi);
                for (o, v) in gp.iter_mut().zip(&e.grad_params) {
                    *o += t.w * r * v;
                }
            }
        }
        if cancelled(s, a) {
            return Ok(WavefunctionEval::node(n * d, q));
        }
        for v in grad.iter_mut().chain(gp.iter_mut()) {
            *v /= s;
        }
        Ok(WavefunctionEval {
            log_abs: lmax + (s / n as f64).abs().ln(),
            sign: s.signum(),
            grad_x: grad,
            laplacian_over_psi: lap / s,
            grad_params: gp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{perturb_asymmetric, Ansatz};
    use crate::basis::PlaneWaveBasis;
    use crate::groups::is_symmetric_configuration;
    use crate::hamiltonian::local_energy;
    use crate::lattice::LatticeKind;
    use crate::smoothing::StepKind;
    use crate::testutil::*;

    fn assert_same_value(a: (f64, f64), b: (f64, f64), tol: f64) {
        assert_eq!(a.1, b.1);
        assert!((a.0 - b.0).abs() <= tol, "{a:?} {b:?}");
    }

    #[test]
    fn identity_subset_is_base() {
        let a = random_ansatz(square_cell(), 2, 2, 1, true, 1);
        let ga = GroupAveraged::new(&a, vec![Isometry::identity(2)]).unwrap();
        let mut r = rng(2);
        for _ in 0..20 {
            let c = random_config(&mut r, 2, 2, 1);
            let x = a.evaluate(&c).unwrap();
            let y = ga.evaluate(&c).unwrap();
            assert!((x.log_abs - y.log_abs).abs() < 1e-14);
            assert_eq!(x.sign, y.sign);
            for (p, q) in x.grad_x.iter().zip(&y.grad_x).chain(x.grad_params.iter().zip(&y.grad_params)) {
                assert!((p - q).abs() < 1e-12 * p.abs().max(1.0));
            }
        }
        assert!(matches!(GroupAveraged::new(&a, vec![]), Err(Error::EmptySubset)));
    }

    #[test]
    fn ga_is_invariant_and_differentiable() {
        let cases = [
            ("square-p4mm", square_cell(), 2usize, 1usize),
            ("hex-p6mm", Cell::new(LatticeKind::Hexagonal, 2.5), 1, 1),
            ("chain-p2", Cell::new(LatticeKind::Chain, 2.0), 2, 1),
        ];
        let mut r = rng(3);
        for (name, cell, nu, nd) in cases {
            let group = SpaceGroup::builtin(name).unwrap();
            let a = random_ansatz(cell, 2, nu, nd, true, 4);
            let ga = GroupAveraged::full(&a, &group).unwrap();
            let theta = a.params();
            let d = cell.dim();
            for _ in 0..100 {
                let c = random_config(&mut r, d, nu, nd);
                let v = ga.value(&c).unwrap();
                if v.1 == 0.0 {
                    continue;
                }
                for g in group.elements() {
                    assert_same_value(ga.value(&apply_diagonal(g, &c).unwrap()).unwrap(), v, 1e-10);
                }
            }
            for _ in 0..20 {
                let c = random_config(&mut r, d, nu, nd);
                let e = ga.evaluate(&c).unwrap();
                if e.is_node() || e.grad_x.iter().any(|g| g.abs() > 30.0) {
                    continue;
                }
                let f = |t: &[f64]| {
                    let b = a.with_params(t).unwrap();
                    GroupAveraged::full(&b, &group).unwrap().value(&c).unwrap().0
                };
                check_derivatives(&ga, &c, 1e-6, Some(&f), &theta);
            }
        }
    }

    #[test]
    fn ga_is_linear_over_disjoint_halves() {
        let group = SpaceGroup::builtin("square-p4mm").unwrap();
        let a = random_ansatz(square_cell(), 2, 1, 1, false, 5);
        let all = GroupAveraged::full(&a, &group).unwrap();
        let first = GroupAveraged::from_group(&a, &group, &[0, 1, 2, 3]).unwrap();
        let second = GroupAveraged::from_group(&a, &group, &[4, 5, 6, 7]).unwrap();
        let mut r = rng(6);
        for _ in 0..50 {
            let c = random_config(&mut r, 2, 1, 1);
            let lin = |v: (f64, f64)| v.1 * v.0.exp();
            let lhs = lin(all.value(&c).unwrap());
            let rhs = 0.5 * (lin(first.value(&c).unwrap()) + lin(second.value(&c).unwrap()));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn ga_of_exact_state_keeps_energy() {
        let (h, a, e0) = well_chain_exact();
        let group = SpaceGroup::builtin("chain-reflection").unwrap();
        let mut r = rng(7);
        for subset in [vec![0], vec![1], vec![0, 1]] {
            let ga = GroupAveraged::from_group(&a, &group, &subset).unwrap();
            for _ in 0..300 {
                let c = random_config(&mut r, 1, 2, 0);
                if let Ok(e) = local_energy(&h, &ga, &c) {
                    assert!((e - e0).abs() <= 1e-8 * e0.abs());
                }
            }
        }
    }

    #[test]
    fn perturbation_is_removed_by_group_average() {
        let (_, a, _) = well_chain_exact();
        let group = SpaceGroup::builtin("chain-reflection").unwrap();
        let p = perturb_asymmetric(&a, &group, 0.2, 9).unwrap();
        let ga = GroupAveraged::full(&p, &group).unwrap();
        let mut r = rng(8);
        let mut max_diff: f64 = 0.0;
        for _ in 0..100 {
            let c = random_config(&mut r, 1, 2, 0);
            let base = a.value(&c).unwrap();
            if base.1 == 0.0 {
                continue;
            }
            assert_same_value(ga.value(&c).unwrap(), base, 1e-10);
            let pv = p.value(&c).unwrap();
            max_diff = max_diff.max((pv.0 - base.0).abs());
        }
        assert!(max_diff >= 0.02, "{max_diff}");
        assert_eq!(perturb_asymmetric(&a, &group, 0.0, 9).unwrap(), a);
    }

    #[test]
    fn da_draws_are_uniform() {
        let group = SpaceGroup::builtin("square-p4mm").unwrap();
        let c = Configuration::with_counts(2, vec![0.1, 0.2], 1).unwrap();
        let images: Vec<Configuration> = group.elements().iter().map(|g| apply_diagonal(g, &c).unwrap()).collect();
        let mut counts = vec![0usize; 8];
        let mut r = rng(9);
        let draws = 100_000;
        for _ in 0..draws {
            let out = da_transform(&group, &c, &mut r).unwrap();
            let i = images.iter().position(|im| im.max_torus_deviation(&out) < 1e-12).unwrap();
            counts[i] += 1;
        }
        let p = 1.0 / 8.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for k in counts {
            assert!((k as f64 - draws as f64 * p).abs() <= 3.0 * sigma);
        }
        let trivial = SpaceGroup::builtin("chain-trivial").unwrap();
        let c1 = Configuration::with_counts(1, vec![0.3, 0.9], 2).unwrap();
        assert_eq!(da_transform(&trivial, &c1, &mut r).unwrap(), c1);
        let refl = SpaceGroup::builtin("chain-reflection").unwrap();
        let sym = Configuration::with_counts(1, vec![0.25, 0.75], 2).unwrap();
        assert!(is_symmetric_configuration(&refl, &sym, 1e-12));
        let out = da_transform(&refl, &sym, &mut r).unwrap();
        assert!(is_symmetric_configuration(&SpaceGroup::trivial(LatticeKind::Chain), &out, 1e-12));
        assert!(out.max_torus_deviation(&sym) < 1e-12 || out.max_torus_deviation(&sym.swapped(0, 1)) < 1e-12);
    }

    #[test]
    fn gas_subsample_contract() {
        let group = SpaceGroup::builtin("square-p4mm").unwrap();
        let mut full = gas_subsample_indices(&group, 8, 3, 11).unwrap();
        full.sort();
        assert_eq!(full, (0..8).collect::<Vec<_>>());
        assert_eq!(gas_subsample_indices(&group, 3, 5, 11).unwrap(), gas_subsample_indices(&group, 3, 5, 11).unwrap());
        assert!(matches!(gas_subsample_indices(&group, 0, 0, 1), Err(Error::SubsampleSize { .. })));
        assert!(matches!(gas_subsample_indices(&group, 9, 0, 1), Err(Error::SubsampleSize { .. })));
        let steps = 100_000u64;
        let mut counts = vec![0usize; 8];
        for s in 0..steps {
            counts[gas_subsample_indices(&group, 1, s, 12).unwrap()[0]] += 1;
        }
        let p = 1.0 / 8.0;
        let sigma = (steps as f64 * p * (1.0 - p)).sqrt();
        for k in counts {
            assert!((k as f64 - steps as f64 * p).abs() <= 3.0 * sigma);
        }
        let idx = gas_subsample_indices(&group, 4, 1, 2).unwrap();
        let sub = gas_subsample(&group, 4, 1, 2).unwrap();
        for (i, g) in idx.iter().zip(&sub) {
            assert_eq!(&group.elements()[*i], g);
        }
    }

    fn one_electron_chain() -> Ansatz {
        let cell = Cell::new(LatticeKind::Chain, 1.0);
        let basis = PlaneWaveBasis::new(LatticeKind::Chain, 2);
        Ansatz::new(cell, basis, 1, 0, vec![2.0, 0.4, 0.7, -0.3, 0.2], vec![], None).unwrap()
    }

    #[test]
    fn sc_single_electron_examples() {
        let a = one_electron_chain();
        let group = SpaceGroup::builtin("chain-trivial").unwrap();
        for kind in [StepKind::Spline2, StepKind::SmoothInf] {
            let spec = SmoothingSpec::new(kind, 0.05).unwrap();
            let sc = SmoothedCanonical::new(&a, group.clone(), FundamentalRegion::interval(0.0, 1.0), spec).unwrap();
            let c = Configuration::with_counts(1, vec![0.5], 1).unwrap();
            assert_eq!(sc.evaluate(&c).unwrap(), a.evaluate(&c).unwrap());
            let c0 = Configuration::with_counts(1, vec![0.0], 1).unwrap();
            let base = a.value(&c0).unwrap();
            assert_same_value(sc.value(&c0).unwrap(), base, 1e-14);
            assert_same_value(sc.evaluate(&c0).map(|e| (e.log_abs, e.sign)).unwrap(), base, 1e-14);
        }
        let spec = SmoothingSpec::new(StepKind::Spline2, 0.3).unwrap();
        assert!(matches!(
            SmoothedCanonical::new(&a, group, FundamentalRegion::interval(0.0, 0.5), spec),
            Err(Error::EpsilonTooLarge { .. })
        ));
    }

    #[test]
    fn sc_reflection_single_electron_average() {
        // at a reflection-fixed point the two branches average exactly
        let a = one_electron_chain();
        let group = SpaceGroup::builtin("chain-reflection").unwrap();
        let spec = SmoothingSpec::new(StepKind::Spline2, 0.05).unwrap();
        let sc = SmoothedCanonical::new(&a, group, FundamentalRegion::interval(0.0, 0.5), spec).unwrap();
        let c = Configuration::with_counts(1, vec![0.5], 1).unwrap();
        let lin = |v: (f64, f64)| v.1 * v.0.exp();
        let expect = 0.5 * (lin(a.value(&c).unwrap()) + lin(a.value(&c).unwrap()));
        assert!((lin(sc.value(&c).unwrap()) - expect).abs() < 1e-12);
        let c = Configuration::with_counts(1, vec![0.49], 1).unwrap();
        let mirrored = Configuration::with_counts(1, vec![0.51], 1).unwrap();
        let lin_sc = lin(sc.value(&c).unwrap());
        let lo = lin(a.value(&c).unwrap()).min(lin(a.value(&mirrored).unwrap()));
        let hi = lin(a.value(&c).unwrap()).max(lin(a.value(&mirrored).unwrap()));
        assert!(lin_sc >= lo - 1e-12 && lin_sc <= hi + 1e-12);
    }

    #[test]
    fn sc_invariance_and_antisymmetry() {
        let cases = [
            ("chain-reflection", Cell::new(LatticeKind::Chain, 2.0), 2usize, 1usize, 3u32),
            ("chain-p2", Cell::new(LatticeKind::Chain, 2.0), 2, 0, 3),
            ("square-p4mm", square_cell(), 2, 1, 2),
        ];
        let mut r = rng(13);
        for (name, cell, nu, nd, cutoff) in cases {
            let group = SpaceGroup::builtin(name).unwrap();
            let region = FundamentalRegion::for_builtin_group(name).unwrap();
            let a = random_ansatz(cell, cutoff, nu, nd, true, 14);
            let d = cell.dim();
            for kind in [StepKind::Spline2, StepKind::SmoothInf] {
                let spec = SmoothingSpec::new(kind, 0.08).unwrap();
                let sc = SmoothedCanonical::new(&a, group.clone(), region.clone(), spec).unwrap();
                for _ in 0..100 {
                    let c = random_config(&mut r, d, nu, nd);
                    let v = sc.value(&c).unwrap();
                    if v.1 == 0.0 {
                        continue;
                    }
                    for g in group.elements() {
                        let gc = apply_diagonal(g, &c).unwrap();
                        assert_same_value(sc.value(&gc).unwrap(), v, 1e-10);
                    }
                    let sw = sc.value(&c.swapped(0, 1)).unwrap();
                    assert_eq!(sw.1, -v.1);
                    assert!((sw.0 - v.0).abs() <= 1e-12 * v.0.abs().max(1.0));
                    let e = sc.evaluate(&c).unwrap();
                    assert!((e.log_abs - v.0).abs() < 1e-12 && e.sign == v.1);
                }
            }
        }
    }

    #[test]
    fn sc_derivatives_across_the_shell() {
        let cell = Cell::new(LatticeKind::Chain, 2.0);
        let group = SpaceGroup::builtin("chain-reflection").unwrap();
        let region = FundamentalRegion::interval(0.0, 0.5);
        let a = random_ansatz(cell, 3, 2, 1, true, 15);
        let theta = a.params();
        for kind in [StepKind::Spline2, StepKind::SmoothInf] {
            let spec = SmoothingSpec::new(kind, 0.08).unwrap();
            let sc = SmoothedCanonical::new(&a, group.clone(), region.clone(), spec).unwrap();
            let mut checked = 0;
            for i in 0..200 {
                // electron 0 sweeps across the face at 1/2
                let x0 = 0.38 + 0.24 * (i as f64 + 0.5) / 200.0;
                let c = Configuration::with_counts(1, vec![x0, 0.13, 0.71], 2).unwrap();
                let e = sc.evaluate(&c).unwrap();
                if e.is_node() || e.grad_x.iter().any(|g| g.abs() > 30.0) {
                    continue;
                }
                let f = |t: &[f64]| {
                    let b = a.with_params(t).unwrap();
                    SmoothedCanonical::new(&b, group.clone(), region.clone(), spec).unwrap().value(&c).unwrap().0
                };
                check_derivatives(&sc, &c, 1e-5, Some(&f), &theta);
                checked += 1;
            }
            assert!(checked > 150);
        }
    }
}
