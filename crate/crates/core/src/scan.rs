//! Diagonal-symmetry visualization: translate a symmetric configuration over
//! the unit cell and record `log|psi|^2`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::ansatz::Wavefunction;
use crate::error::{Error, Result};
use crate::groups::{apply_diagonal, build_g_tilde, first_asymmetric_element, Configuration, Isometry, SpaceGroup};
use crate::lattice::wrap;

pub const DEFAULT_RESOLUTION: usize = 101;
/// Tolerance of the symmetric-base check.
pub const BASE_TOL: f64 = 1e-9;
const SNAP_TOL: f64 = 1e-9;

/// `log|psi(x + t)|^2` on a grid of translations `t`. Grid coordinates run
/// over `i / (resolution - 1)` for `i = 0..resolution`, so both cell edges
/// are included. Nodes are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub base: Configuration,
    pub axes: Vec<usize>,
    pub resolution: usize,
    /// Row-major, first axis slowest.
    pub values: Vec<f64>,
    pub nodes: usize,
}

impl ScanGrid {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn spacing(&self) -> f64 {
        1.0 / (self.resolution - 1) as f64
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.resolution + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for slot in out.iter_mut().rev() {
            *slot = flat % self.resolution;
            flat /= self.resolution;
        }
        out
    }

    /// The translation at a grid point, in full lattice coordinates.
    pub fn translation(&self, flat: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.dim()];
        for (&a, i) in self.axes.iter().zip(self.multi_index(flat)) {
            t[a] = i as f64 * self.spacing();
        }
        t
    }

    /// Grid point holding `t` modulo the lattice, if `t` lies on the scanned
    /// plane and on a grid node.
    pub fn snap(&self, t: &[f64]) -> Option<usize> {
        let m = self.resolution - 1;
        let mut multi = Vec::with_capacity(self.axes.len());
        for (a, &x) in t.iter().enumerate() {
            if self.axes.contains(&a) {
                // points already on the grid keep their index, edges included
                let raw = x * m as f64;
                let i = raw.round();
                if (raw - i).abs() <= SNAP_TOL * m as f64 && (0.0..=m as f64).contains(&i) {
                    multi.push(i as usize);
                    continue;
                }
                let w = wrap(x);
                let w = if w > 1.0 - SNAP_TOL { w - 1.0 } else { w };
                let f = w * m as f64;
                let i = f.round();
                if (f - i).abs() > SNAP_TOL * m as f64 {
                    return None;
                }
                multi.push((i as usize) % m);
            } else if crate::lattice::min_image(x).abs() > SNAP_TOL {
                return None;
            }
        }
        // axes may be listed out of coordinate order
        let mut ordered = vec![0; self.axes.len()];
        let mut sorted: Vec<usize> = self.axes.clone();
        sorted.sort_unstable();
        for (k, &a) in self.axes.iter().enumerate() {
            ordered[k] = multi[sorted.iter().position(|&b| b == a).expect("axis present")];
        }
        Some(self.index_of(&ordered))
    }
}

/// Fails with the index of the first element of `G~` that does not map
/// `base` onto itself.
pub fn check_symmetric_base(group: &SpaceGroup, base: &Configuration) -> Result<()> {
    let tilde = build_g_tilde(group);
    match first_asymmetric_element(&tilde, base, BASE_TOL) {
        None => Ok(()),
        Some(i) => Err(Error::NotInvariant(format!(
            "base configuration is not symmetric under element {i} of the rotation group: {:?}",
            tilde.elements()[i].rotation()
        ))),
    }
}

fn log_density<W: Wavefunction + ?Sized>(psi: &W, c: &Configuration) -> Result<f64> {
    let (l, s) = psi.value(c)?;
    Ok(if s == 0.0 { f64::NAN } else { 2.0 * l })
}

/// Scan over the given axes without the base check.
pub fn scan_unchecked<W: Wavefunction + ?Sized>(
    psi: &W,
    base: &Configuration,
    axes: &[usize],
    resolution: usize,
) -> Result<ScanGrid> {
    let d = base.dim();
    if resolution < 2 {
        return Err(Error::Invalid("scan resolution must be at least 2".into()));
    }
    if axes.is_empty() || axes.len() > d || axes.iter().any(|&a| a >= d) {
        return Err(Error::Invalid(format!("scan axes {axes:?} invalid for dimension {d}")));
    }
    if (1..axes.len()).any(|i| axes[..i].contains(&axes[i])) {
        return Err(Error::Invalid("repeated scan axis".into()));
    }
    if psi.dim() != d {
        return Err(Error::DimensionMismatch { expected: psi.dim(), got: d });
    }
    let mut grid = ScanGrid {
        base: base.clone(),
        axes: axes.to_vec(),
        resolution,
        values: Vec::new(),
        nodes: 0,
    };
    let total = resolution.pow(axes.len() as u32);
    grid.values.reserve(total);
    for flat in 0..total {
        let v = log_density(psi, &base.translated(&grid.translation(flat)))?;
        if v.is_nan() {
            grid.nodes += 1;
        }
        grid.values.push(v);
    }
    Ok(grid)
}

/// Scan over every lattice axis after verifying that `base` is symmetric
/// under the rotation group of `group`.
pub fn scan<W: Wavefunction + ?Sized>(
    psi: &W,
    group: &SpaceGroup,
    base: &Configuration,
    resolution: usize,
) -> Result<ScanGrid> {
    check_symmetric_base(group, base)?;
    let axes: Vec<usize> = (0..base.dim()).collect();
    scan_unchecked(psi, base, &axes, resolution)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementError {
    pub element: usize,
    /// Largest `|f(g t) - f(t)|` over non-node grid points.
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryError {
    /// Per grid point, `max_g |f(g t) - f(t)|`; NaN at nodes.
    pub map: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub nodes: usize,
    pub per_element: Vec<ElementError>,
}

impl SymmetryError {
    /// Elements whose relation `f(g t) = f(t)` holds everywhere within `tol`.
    pub fn satisfied(&self, tol: f64) -> usize {
        self.per_element.iter().filter(|e| e.max <= tol).count()
    }
}

fn grid_image(grid: &ScanGrid, g: &Isometry, flat: usize) -> Result<usize> {
    let t = grid.translation(flat);
    let mut y = vec![0.0; t.len()];
    g.apply(&t, &mut y);
    grid.snap(&y).ok_or_else(|| {
        Error::Invalid(format!("group element {:?} does not map the scan grid onto itself", g.rotation()))
    })
}

/// Per-point symmetry error of a scan under the affine maps of `group`.
pub fn symmetry_error(grid: &ScanGrid, group: &SpaceGroup) -> Result<SymmetryError> {
    if group.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: group.dim() });
    }
    let n = grid.len();
    let mut map = vec![0.0; n];
    let mut per_element: Vec<ElementError> =
        (0..group.order()).map(|element| ElementError { element, max: 0.0 }).collect();
    for (e, g) in group.elements().iter().enumerate() {
        for (i, slot) in map.iter_mut().enumerate() {
            let f0 = grid.values[i];
            let f1 = grid.values[grid_image(grid, g, i)?];
            if f0.is_nan() || f1.is_nan() {
                *slot = f64::NAN;
                continue;
            }
            let err = (f1 - f0).abs();
            per_element[e].max = per_element[e].max.max(err);
            if !slot.is_nan() {
                *slot = slot.max(err);
            }
        }
    }
    let finite: Vec<f64> = map.iter().copied().filter(|v| !v.is_nan()).collect();
    let max = finite.iter().copied().fold(0.0, f64::max);
    let mean = if finite.is_empty() { 0.0 } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    Ok(SymmetryError { nodes: n - finite.len(), map, max, mean, per_element })
}

/// Largest `|(f~(g t) - f~(t)) - (f(g(x + t)) - f(x + t))|` over the given
/// translations and every element; nodes are skipped.
pub fn lemma_defect<W: Wavefunction + ?Sized>(
    psi: &W,
    group: &SpaceGroup,
    base: &Configuration,
    translations: &[Vec<f64>],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut gt = vec![0.0; base.dim()];
    for t in translations {
        let xt = base.translated(t);
        let ft = log_density(psi, &xt)?;
        for g in group.elements() {
            g.apply(t, &mut gt);
            let fgt = log_density(psi, &base.translated(&gt))?;
            let fgx = log_density(psi, &apply_diagonal(g, &xt)?)?;
            let d = (fgt - ft) - (fgx - ft);
            if d.is_nan() {
                continue;
            }
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

/// The orbit of `seeds` under the rotation group of `group`, duplicates
/// removed. All electrons get the same spin.
pub fn orbit_configuration(group: &SpaceGroup, seeds: &[Vec<f64>]) -> Result<Configuration> {
    let tilde = build_g_tilde(group);
    let d = group.dim();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut y = vec![0.0; d];
    for s in seeds {
        if s.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: s.len() });
        }
        for g in tilde.elements() {
            g.apply(s, &mut y);
            let p: Vec<f64> = y.iter().map(|v| wrap(*v)).collect();
            let dup = points.iter().any(|q| {
                q.iter().zip(&p).all(|(a, b)| crate::lattice::min_image(a - b).abs() <= BASE_TOL)
            });
            if !dup {
                points.push(p);
            }
        }
    }
    let n = points.len();
    Configuration::with_counts(d, points.concat(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{perturb_asymmetric, Ansatz};
    use crate::basis::PlaneWaveBasis;
    use crate::groups::close_group;
    use crate::lattice::{Cell, LatticeKind};
    use crate::symmetrize::GroupAveraged;
    use crate::testutil::*;
    use rand::Rng;

    fn square_fixture() -> (SpaceGroup, Configuration, Ansatz) {
        let g = SpaceGroup::builtin("square-p4mm").unwrap();
        let base = orbit_configuration(&g, &[vec![0.25, 0.0]]).unwrap();
        let a = Ansatz::initial(Cell::new(LatticeKind::Square, 1.0), 2, 4, 0, false, 0.3, 5).unwrap();
        (g, base, a)
    }

    #[test]
    fn constant_wavefunction_is_flat() {
        let cell = Cell::new(LatticeKind::Chain, 1.0);
        let a = Ansatz::new(cell, PlaneWaveBasis::new(LatticeKind::Chain, 1), 1, 0, vec![1.0, 0.0, 0.0], vec![], None)
            .unwrap();
        let g = SpaceGroup::builtin("chain-reflection").unwrap();
        let base = Configuration::with_counts(1, vec![0.0], 1).unwrap();
        let grid = scan(&a, &g, &base, 51).unwrap();
        assert!(grid.values.iter().all(|v| (v - grid.values[0]).abs() < 1e-14));
        assert_eq!(symmetry_error(&grid, &g).unwrap().max, 0.0);
    }

    #[test]
    fn asymmetric_base_is_rejected() {
        let g = SpaceGroup::builtin("chain-reflection").unwrap();
        let base = Configuration::with_counts(1, vec![0.1, 0.3], 2).unwrap();
        let (_, a, _) = well_chain_exact();
        assert!(matches!(scan(&a, &g, &base, 11), Err(Error::NotInvariant(_))));
        assert!(scan_unchecked(&a, &base, &[0], 11).is_ok());
    }

    #[test]
    fn square_orbit_is_symmetric() {
        let (g, base, _) = square_fixture();
        assert_eq!(base.n(), 4);
        assert!(check_symmetric_base(&g, &base).is_ok());
    }

    #[test]
    fn pa_scan_is_symmetric_og_is_not() {
        let (g, base, a) = square_fixture();
        let pa = GroupAveraged::full(&a, &g).unwrap();
        let grid = scan(&pa, &g, &base, 41).unwrap();
        let err = symmetry_error(&grid, &g).unwrap();
        assert!(err.max <= 1e-9, "{}", err.max);
        assert_eq!(err.satisfied(1e-9), g.order());
        let og = symmetry_error(&scan(&a, &g, &base, 41).unwrap(), &g).unwrap();
        assert!(og.max >= 1e-2, "{}", og.max);
        assert!(og.satisfied(1e-9) < g.order());
    }

    #[test]
    fn trivial_group_has_zero_map() {
        let (_, base, a) = square_fixture();
        let t = SpaceGroup::trivial(LatticeKind::Square);
        let grid = scan(&a, &t, &base, 21).unwrap();
        let err = symmetry_error(&grid, &t).unwrap();
        assert!(err.map.iter().all(|v| *v == 0.0 || v.is_nan()));
    }

    #[test]
    fn lemma_identity_spot_checks() {
        let (g, base, a) = square_fixture();
        let pa = GroupAveraged::full(&a, &g).unwrap();
        let mut r = rng(3);
        let ts: Vec<Vec<f64>> = (0..50).map(|_| vec![r.random(), r.random()]).collect();
        assert!(lemma_defect(&a, &g, &base, &ts).unwrap() <= 1e-12);
        assert!(lemma_defect(&pa, &g, &base, &ts).unwrap() <= 1e-12);
    }

    #[test]
    fn injected_asymmetry_matches_bound() {
        // psi = 1 + a sin(2 pi x): log|psi|^2 ~ 2a sin(2 pi x), so A = 2a and
        // the reflection error peaks at 2A
        let cell = Cell::new(LatticeKind::Chain, 1.0);
        let amp = 0.02;
        let a = Ansatz::new(cell, PlaneWaveBasis::new(LatticeKind::Chain, 1), 1, 0, vec![1.0, 0.0, amp], vec![], None)
            .unwrap();
        let g = SpaceGroup::builtin("chain-reflection").unwrap();
        let base = Configuration::with_counts(1, vec![0.0], 1).unwrap();
        let err = symmetry_error(&scan(&a, &g, &base, 101).unwrap(), &g).unwrap();
        let bound = 2.0 * (2.0 * amp);
        assert!((err.max - bound).abs() <= 0.1 * bound, "{} vs {bound}", err.max);
    }

    #[test]
    fn full_base_shows_more_symmetry_than_partial() {
        let g = SpaceGroup::builtin("square-p4mm").unwrap();
        let mirror = Isometry::new(&[1, 0, 0, -1], &[0.0, 0.0]).unwrap();
        let h = close_group(LatticeKind::Square, &[mirror], 2).unwrap();
        let partial = orbit_configuration(&h, &[vec![0.3, 0.1], vec![-0.2, 0.15]]).unwrap();
        assert_eq!(partial.n(), 4);
        assert!(check_symmetric_base(&g, &partial).is_err());
        let full = orbit_configuration(&g, &[vec![0.25, 0.0]]).unwrap();
        let a = Ansatz::initial(Cell::new(LatticeKind::Square, 1.0), 2, 4, 0, false, 0.3, 5).unwrap();
        let pa = GroupAveraged::full(&a, &g).unwrap();
        let on_full = symmetry_error(&scan(&pa, &g, &full, 21).unwrap(), &g).unwrap();
        let on_partial = symmetry_error(&scan(&pa, &h, &partial, 21).unwrap(), &g).unwrap();
        assert_eq!(on_full.satisfied(1e-9), 8);
        assert_eq!(on_partial.satisfied(1e-9), 2);
    }

    #[test]
    fn perturbed_exact_state_in_1d() {
        let (_, a, _) = well_chain_exact();
        let g = SpaceGroup::builtin("chain-reflection").unwrap();
        let p = perturb_asymmetric(&a, &g, 0.2, 1).unwrap();
        let base = Configuration::with_counts(1, vec![0.0, 0.5], 2).unwrap();
        let grid = scan(&p, &g, &base, 101).unwrap();
        assert!(symmetry_error(&grid, &g).unwrap().max > 1e-2);
        let pa = GroupAveraged::full(&p, &g).unwrap();
        let grid = scan(&pa, &g, &base, 101).unwrap();
        assert!(symmetry_error(&grid, &g).unwrap().max <= 1e-9);
    }

    #[test]
    fn incommensurate_grid_is_an_error() {
        let g = SpaceGroup::builtin("chain-half-translation").unwrap();
        let base = Configuration::with_counts(1, vec![0.0], 1).unwrap();
        let (_, a, _) = well_chain_exact();
        let one = Ansatz::initial(*a.cell(), 1, 1, 0, false, 0.0, 1).unwrap();
        let grid = scan(&one, &g, &base, 4).unwrap();
        assert!(symmetry_error(&grid, &g).is_err());
        let grid = scan(&one, &g, &base, 5).unwrap();
        assert!(symmetry_error(&grid, &g).is_ok());
    }
}
