//! Finite groups of lattice isometries acting on the unit torus, and their
//! diagonal action on electron configurations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::lattice::{min_image, wrap, LatticeKind};

/// Integer rotation part in lattice coordinates, padded to 3x3.
pub type IntMat3 = [[i32; 3]; 3];

const KEY_SCALE: f64 = 1e9;
const SNAP: f64 = 1e-10;

/// An affine map `x -> A x + b` in lattice coordinates.
///
/// `A` is stored as an integer matrix: every supported lattice has a basis in
/// which its point group is unimodular. Orthogonality is with respect to the
/// lattice metric (`A^T G A = G`), which reduces to `A^T A = I` for the
/// chain, square and cubic lattices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isometry {
    dim: usize,
    rotation: IntMat3,
    translation: [f64; 3],
}

impl Isometry {
    pub fn identity(dim: usize) -> Self {
        let mut rotation = [[0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate().take(dim) {
            row[i] = 1;
        }
        Isometry { dim, rotation, translation: [0.0; 3] }
    }

    pub fn translation(t: &[f64]) -> Self {
        let mut g = Isometry::identity(t.len());
        g.translation[..t.len()].copy_from_slice(t);
        g
    }

    /// Builds an isometry from a row-major integer rotation and a translation.
    pub fn new(rotation: &[i32], translation: &[f64]) -> Result<Self> {
        let dim = translation.len();
        if !(1..=3).contains(&dim) || rotation.len() != dim * dim {
            return Err(Error::InvalidIsometry(format!(
                "rotation has {} entries for dimension {}",
                rotation.len(),
                dim
            )));
        }
        let mut g = Isometry::identity(dim);
        for r in 0..dim {
            for c in 0..dim {
                g.rotation[r][c] = rotation[r * dim + c];
            }
        }
        g.translation[..dim].copy_from_slice(translation);
        if g.rotation_det().abs() != 1 {
            return Err(Error::InvalidIsometry("rotation is not unimodular".into()));
        }
        Ok(g)
    }

    /// Builds an isometry from a real row-major rotation whose entries must be
    /// integers (within `1e-9`).
    pub fn from_real(rotation: &[f64], translation: &[f64]) -> Result<Self> {
        let mut ints = Vec::with_capacity(rotation.len());
        for &v in rotation {
            let r = v.round();
            if (v - r).abs() > 1e-9 {
                return Err(Error::InvalidIsometry(format!(
                    "rotation entry {v} is not an integer in lattice coordinates"
                )));
            }
            ints.push(r as i32);
        }
        Isometry::new(&ints, translation)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rotation(&self) -> &IntMat3 {
        &self.rotation
    }

    pub fn rotation_entry(&self, r: usize, c: usize) -> f64 {
        self.rotation[r][c] as f64
    }

    pub fn translation_part(&self) -> &[f64] {
        &self.translation[..self.dim]
    }

    /// Same rotation with the translation replaced.
    pub fn with_translation(&self, t: &[f64]) -> Isometry {
        let mut g = *self;
        g.translation = [0.0; 3];
        g.translation[..self.dim].copy_from_slice(&t[..self.dim]);
        g
    }

    pub fn rotation_part(&self) -> Isometry {
        Isometry { dim: self.dim, rotation: self.rotation, translation: [0.0; 3] }
    }

    pub fn rotation_det(&self) -> i32 {
        let a = &self.rotation;
        match self.dim {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// Checks `A^T G A = G` for the lattice metric `G`.
    pub fn is_orthogonal(&self, lattice: LatticeKind) -> bool {
        if lattice.dim() != self.dim {
            return false;
        }
        let g = lattice.metric();
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        s += self.rotation[a][i] as f64 * g[a][b] * self.rotation[b][j] as f64;
                    }
                }
                if (s - g[i][j]).abs() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    /// `A x + b`, without reduction onto the torus.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.dim {
            let mut s = self.translation[r];
            for c in 0..self.dim {
                s += self.rotation[r][c] as f64 * x[c];
            }
            out[r] = s;
        }
    }

    /// `A x + b` reduced into `[0,1)^d`.
    #[inline]
    pub fn apply_wrapped(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
        for v in out[..self.dim].iter_mut() {
            *v = wrap(*v);
        }
    }

    /// `A v` for a displacement or gradient-like vector.
    #[inline]
    pub fn rotate(&self, v: &[f64], out: &mut [f64]) {
        for r in 0..self.dim {
            let mut s = 0.0;
            for c in 0..self.dim {
                s += self.rotation[r][c] as f64 * v[c];
            }
            out[r] = s;
        }
    }

    /// `A^T v`: pulls a gradient at `g(x)` back to `x`.
    #[inline]
    pub fn rotate_transpose(&self, v: &[f64], out: &mut [f64]) {
        for c in 0..self.dim {
            let mut s = 0.0;
            for r in 0..self.dim {
                s += self.rotation[r][c] as f64 * v[r];
            }
            out[c] = s;
        }
    }

    /// `A^T k` for an integer wavevector: `cos(2 pi k.(Ax+b))` has wavevector `A^T k`.
    pub fn pull_wavevector(&self, k: &[i32; 3]) -> [i32; 3] {
        let mut out = [0; 3];
        for c in 0..self.dim {
            for r in 0..self.dim {
                out[c] += self.rotation[r][c] * k[r];
            }
        }
        out
    }

    pub fn inverse(&self) -> Isometry {
        let a = &self.rotation;
        let det = self.rotation_det();
        let mut inv = [[0; 3]; 3];
        match self.dim {
            1 => inv[0][0] = det,
            2 => {
                inv[0][0] = a[1][1] * det;
                inv[0][1] = -a[0][1] * det;
                inv[1][0] = -a[1][0] * det;
                inv[1][1] = a[0][0] * det;
            }
            _ => {
                for r in 0..3 {
                    for c in 0..3 {
                        let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                        let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                        inv[r][c] = (a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1]) * det;
                    }
                }
            }
        }
        let mut g = Isometry { dim: self.dim, rotation: inv, translation: [0.0; 3] };
        let mut t = [0.0; 3];
        g.rotate(&self.translation, &mut t);
        for i in 0..self.dim {
            g.translation[i] = -t[i];
        }
        g
    }

    fn key(&self) -> ([i32; 9], [i64; 3]) {
        let mut r = [0; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[3 * i + j] = self.rotation[i][j];
            }
        }
        let mut t = [0i64; 3];
        for i in 0..self.dim {
            t[i] = (self.translation[i] * KEY_SCALE).round() as i64;
        }
        (r, t)
    }

    /// Equality as maps on the torus.
    pub fn torus_eq(&self, other: &Isometry) -> bool {
        self.dim == other.dim
            && self.rotation == other.rotation
            && (0..self.dim).all(|i| min_image(self.translation[i] - other.translation[i]).abs() < 1e-9)
    }
}

/// `g o h`, i.e. `x -> g(h(x))`.
pub fn compose(g: &Isometry, h: &Isometry) -> Result<Isometry> {
    if g.dim != h.dim {
        return Err(Error::DimensionMismatch { expected: g.dim, got: h.dim });
    }
    let d = g.dim;
    let mut out = Isometry::identity(d);
    for r in 0..d {
        for c in 0..d {
            out.rotation[r][c] = (0..d).map(|m| g.rotation[r][m] * h.rotation[m][c]).sum();
        }
    }
    let mut t = [0.0; 3];
    g.rotate(&h.translation, &mut t);
    for i in 0..d {
        out.translation[i] = t[i] + g.translation[i];
    }
    Ok(out)
}

/// Reduces the translation into `[0,1)^d` (the quotient by supercell translations).
pub fn canonical(g: &Isometry) -> Isometry {
    let mut out = *g;
    for v in out.translation[..g.dim].iter_mut() {
        let mut w = wrap(*v);
        if w < SNAP || 1.0 - w < SNAP {
            w = 0.0;
        }
        *v = w;
    }
    out
}

/// A finite group of isometries modulo supercell translations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGroup {
    lattice: LatticeKind,
    elements: Vec<Isometry>,
    generator_indices: Vec<usize>,
}

/// Closes `generators` under canonical composition.
///
/// Elements are produced breadth-first from the identity; each new layer is
/// sorted lexicographically on `(rotation, translation)`.
pub fn close_group(lattice: LatticeKind, generators: &[Isometry], max_order: usize) -> Result<SpaceGroup> {
    if max_order == 0 {
        return Err(Error::Invalid("max_order must be at least 1".into()));
    }
    let dim = lattice.dim();
    let mut gens = Vec::with_capacity(generators.len());
    for g in generators {
        if g.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: g.dim });
        }
        if !g.is_orthogonal(lattice) {
            return Err(Error::InvalidIsometry(format!(
                "generator {:?} is not an isometry of the {} lattice",
                g.rotation,
                lattice.name()
            )));
        }
        gens.push(canonical(g));
    }

    let identity = Isometry::identity(dim);
    let mut elements = vec![identity];
    let mut seen: BTreeMap<([i32; 9], [i64; 3]), usize> = BTreeMap::new();
    seen.insert(identity.key(), 0);
    let mut frontier = vec![identity];
    while !frontier.is_empty() {
        let mut layer: Vec<Isometry> = Vec::new();
        for e in &frontier {
            for g in &gens {
                let h = canonical(&compose(g, e)?);
                let key = h.key();
                if !seen.contains_key(&key) && !layer.iter().any(|x| x.key() == key) {
                    layer.push(h);
                }
            }
        }
        layer.sort_by_key(|a| a.key());
        for h in &layer {
            seen.insert(h.key(), elements.len());
            elements.push(*h);
            if elements.len() > max_order {
                elements.truncate(max_order);
                return Err(Error::GroupTooLarge { max_order, found: elements });
            }
        }
        frontier = layer;
    }
    let generator_indices = gens.iter().map(|g| seen[&g.key()]).collect();
    Ok(SpaceGroup { lattice, elements, generator_indices })
}

impl SpaceGroup {
    pub fn trivial(lattice: LatticeKind) -> Self {
        SpaceGroup { lattice, elements: vec![Isometry::identity(lattice.dim())], generator_indices: Vec::new() }
    }

    pub fn lattice(&self) -> LatticeKind {
        self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Isometry] {
        &self.elements
    }

    pub fn element(&self, index: usize) -> Result<&Isometry> {
        self.elements.get(index).ok_or(Error::ElementIndex { index, order: self.order() })
    }

    pub fn generator_indices(&self) -> &[usize] {
        &self.generator_indices
    }

    pub fn generators(&self) -> Vec<Isometry> {
        self.generator_indices.iter().map(|&i| self.elements[i]).collect()
    }

    pub fn index_of(&self, g: &Isometry) -> Option<usize> {
        let c = canonical(g);
        self.elements.iter().position(|e| e.torus_eq(&c))
    }

    /// Selects elements by index, preserving the requested order.
    pub fn subset(&self, indices: &[usize]) -> Result<Vec<Isometry>> {
        indices.iter().map(|&i| self.element(i).copied()).collect()
    }

    /// Whether the given indices form a subgroup (closed under composition).
    pub fn is_subgroup(&self, indices: &[usize]) -> bool {
        let members: Vec<&Isometry> = indices.iter().filter_map(|&i| self.elements.get(i)).collect();
        if members.len() != indices.len() || !members.iter().any(|g| g.torus_eq(&Isometry::identity(self.dim()))) {
            return false;
        }
        members.iter().all(|g| {
            members.iter().all(|h| {
                let gh = canonical(&compose(g, h).expect("same dimension"));
                members.iter().any(|m| m.torus_eq(&gh))
            })
        })
    }

    /// Built-in groups by name; see [`SpaceGroup::builtin_names`].
    pub fn builtin(name: &str) -> Option<SpaceGroup> {
        let (lattice, gens): (LatticeKind, Vec<Isometry>) = match name {
            "chain-trivial" => (LatticeKind::Chain, vec![]),
            "chain-reflection" => (LatticeKind::Chain, vec![iso(&[-1], &[0.0])]),
            "chain-half-translation" => (LatticeKind::Chain, vec![iso(&[1], &[0.5])]),
            "chain-p2" => (LatticeKind::Chain, vec![iso(&[-1], &[0.0]), iso(&[1], &[0.5])]),
            "square-trivial" => (LatticeKind::Square, vec![]),
            "square-p2" => (LatticeKind::Square, vec![iso(&[-1, 0, 0, -1], &[0.0, 0.0])]),
            "square-p4" => (LatticeKind::Square, vec![iso(&[0, -1, 1, 0], &[0.0, 0.0])]),
            "square-p4mm" => (
                LatticeKind::Square,
                vec![iso(&[0, -1, 1, 0], &[0.0, 0.0]), iso(&[1, 0, 0, -1], &[0.0, 0.0])],
            ),
            "square-p4mm-centered" => (
                LatticeKind::Square,
                vec![
                    iso(&[0, -1, 1, 0], &[0.0, 0.0]),
                    iso(&[1, 0, 0, -1], &[0.0, 0.0]),
                    iso(&[1, 0, 0, 1], &[0.5, 0.5]),
                ],
            ),
            "hex-p6mm" => (
                LatticeKind::Hexagonal,
                vec![iso(&[0, -1, 1, 1], &[0.0, 0.0]), iso(&[0, 1, 1, 0], &[0.0, 0.0])],
            ),
            "cubic-m3m" => (
                LatticeKind::Cubic,
                vec![
                    iso(&[0, -1, 0, 1, 0, 0, 0, 0, 1], &[0.0; 3]),
                    iso(&[1, 0, 0, 0, 0, -1, 0, 1, 0], &[0.0; 3]),
                    iso(&[-1, 0, 0, 0, -1, 0, 0, 0, -1], &[0.0; 3]),
                ],
            ),
            _ => return None,
        };
        Some(close_group(lattice, &gens, 192).expect("built-in generators close"))
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &[
            "chain-trivial",
            "chain-reflection",
            "chain-half-translation",
            "chain-p2",
            "square-trivial",
            "square-p2",
            "square-p4",
            "square-p4mm",
            "square-p4mm-centered",
            "hex-p6mm",
            "cubic-m3m",
        ]
    }
}

fn iso(rot: &[i32], t: &[f64]) -> Isometry {
    Isometry::new(rot, t).expect("valid built-in isometry")
}

/// Spin label of an electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

/// `n` electron positions in lattice coordinates plus spin labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    positions: Vec<f64>,
    spins: Vec<Spin>,
}

impl Configuration {
    /// `positions` is row-major `n x dim`.
    pub fn new(dim: usize, positions: Vec<f64>, spins: Vec<Spin>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Invalid(format!("dimension {dim} not in 1..=3")));
        }
        if spins.is_empty() {
            return Err(Error::Invalid("configuration needs at least one electron".into()));
        }
        if positions.len() != spins.len() * dim {
            return Err(Error::DimensionMismatch { expected: spins.len() * dim, got: positions.len() });
        }
        Ok(Configuration { dim, positions, spins })
    }

    /// Convenience constructor: the first `n_up` electrons are spin up.
    pub fn with_counts(dim: usize, positions: Vec<f64>, n_up: usize) -> Result<Self> {
        let n = positions.len() / dim.max(1);
        let spins = (0..n).map(|i| if i < n_up { Spin::Up } else { Spin::Down }).collect();
        Configuration::new(dim, positions, spins)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }

    pub fn spin(&self, i: usize) -> Spin {
        self.spins[i]
    }

    pub fn count(&self, spin: Spin) -> usize {
        self.spins.iter().filter(|&&s| s == spin).count()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn wrapped(&self) -> Configuration {
        let mut c = self.clone();
        for v in c.positions.iter_mut() {
            *v = wrap(*v);
        }
        c
    }

    /// Exchanges the positions of electrons `i` and `j` (spins stay in place).
    pub fn swapped(&self, i: usize, j: usize) -> Configuration {
        let mut c = self.clone();
        for a in 0..self.dim {
            c.positions.swap(i * self.dim + a, j * self.dim + a);
        }
        c
    }

    /// Adds the same displacement to every electron, without wrapping.
    pub fn translated(&self, t: &[f64]) -> Configuration {
        let mut c = self.clone();
        for i in 0..self.n() {
            for a in 0..self.dim {
                c.positions[i * self.dim + a] += t[a];
            }
        }
        c
    }

    /// Torus distance between matching electrons, maximized over electrons.
    pub fn max_torus_deviation(&self, other: &Configuration) -> f64 {
        self.positions
            .iter()
            .zip(&other.positions)
            .map(|(a, b)| min_image(a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Applies `g` to every electron and reduces onto the torus; spins are kept.
pub fn apply_diagonal(g: &Isometry, c: &Configuration) -> Result<Configuration> {
    if g.dim != c.dim {
        return Err(Error::DimensionMismatch { expected: c.dim, got: g.dim });
    }
    let mut out = c.clone();
    let d = c.dim;
    for i in 0..c.n() {
        g.apply_wrapped(&c.positions[i * d..(i + 1) * d], &mut out.positions[i * d..(i + 1) * d]);
    }
    Ok(out)
}

/// Diagonal action `g(x) = (g(x_1), ..., g(x_n))` of a group on configurations.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalAction<'a> {
    pub group: &'a SpaceGroup,
}

impl<'a> DiagonalAction<'a> {
    pub fn new(group: &'a SpaceGroup) -> Self {
        DiagonalAction { group }
    }

    pub fn apply(&self, index: usize, c: &Configuration) -> Result<Configuration> {
        apply_diagonal(self.group.element(index)?, c)
    }

    pub fn orbit(&self, c: &Configuration) -> Result<Vec<Configuration>> {
        self.group.elements().iter().map(|g| apply_diagonal(g, c)).collect()
    }
}

/// The group generated by the rotation parts of `group`.
///
/// Starts from the rotation parts of the generators and adds further rotation
/// parts only when they are not already generated, so a point group maps to
/// itself with identical generators and element order.
pub fn build_g_tilde(group: &SpaceGroup) -> SpaceGroup {
    let max = group.order().max(1);
    let mut gens: Vec<Isometry> = Vec::new();
    for g in group.generators() {
        let r = g.rotation_part();
        if !gens.iter().any(|x| x.torus_eq(&r)) {
            gens.push(r);
        }
    }
    let mut tilde = close_group(group.lattice(), &gens, max).expect("rotation parts of a finite group close");
    for g in group.elements() {
        let r = g.rotation_part();
        if tilde.index_of(&r).is_none() {
            gens.push(r);
            tilde = close_group(group.lattice(), &gens, max).expect("rotation parts of a finite group close");
        }
    }
    tilde
}

/// Index of the first group element under which `c` is not mapped to itself up
/// to a permutation of same-spin electrons.
pub fn first_asymmetric_element(group: &SpaceGroup, c: &Configuration, tol: f64) -> Option<usize> {
    let d = c.dim();
    let n = c.n();
    let mut used = vec![false; n];
    let mut y = [0.0; 3];
    for (gi, g) in group.elements().iter().enumerate() {
        if g.dim() != d {
            return Some(gi);
        }
        used.iter_mut().for_each(|u| *u = false);
        for i in 0..n {
            g.apply(c.position(i), &mut y);
            let hit = (0..n).find(|&j| {
                !used[j]
                    && c.spin(j) == c.spin(i)
                    && (0..d).all(|a| min_image(y[a] - c.position(j)[a]).abs() <= tol)
            });
            match hit {
                Some(j) => used[j] = true,
                None => return Some(gi),
            }
        }
    }
    None
}

pub fn is_symmetric_configuration(group: &SpaceGroup, c: &Configuration, tol: f64) -> bool {
    first_asymmetric_element(group, c, tol).is_none()
}
