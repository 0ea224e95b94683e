//! Supported lattices, the simulation cell, and torus arithmetic.
//!
//! All positions are lattice coordinates: the supercell is the unit box
//! `[0,1)^d` and physical lengths only enter through [`Cell::scale`] and the
//! lattice metric.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Small dense `d x d` matrix, padded to 3x3.
pub type Mat3 = [[f64; 3]; 3];

/// Lattice families with integer point-group matrices in lattice coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeKind {
    Chain,
    Square,
    /// 2D hexagonal lattice with unit vectors at 60 degrees.
    Hexagonal,
    Cubic,
}

impl LatticeKind {
    pub fn dim(self) -> usize {
        match self {
            LatticeKind::Chain => 1,
            LatticeKind::Square | LatticeKind::Hexagonal => 2,
            LatticeKind::Cubic => 3,
        }
    }

    /// Gram matrix `G_ab = a_a . a_b` of the unit lattice vectors.
    pub fn metric(self) -> Mat3 {
        match self {
            LatticeKind::Hexagonal => [[1.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 0.0]],
            _ => {
                let mut g = [[0.0; 3]; 3];
                for (i, row) in g.iter_mut().enumerate().take(self.dim()) {
                    row[i] = 1.0;
                }
                g
            }
        }
    }

    /// Inverse of [`LatticeKind::metric`] on the active `d x d` block.
    pub fn inverse_metric(self) -> Mat3 {
        match self {
            LatticeKind::Hexagonal => {
                let s = 1.0 / 0.75;
                [[s, -0.5 * s, 0.0], [-0.5 * s, s, 0.0], [0.0, 0.0, 0.0]]
            }
            _ => self.metric(),
        }
    }

    /// Volume of the unit cell spanned by the lattice vectors at unit scale.
    pub fn unit_volume(self) -> f64 {
        match self {
            LatticeKind::Hexagonal => 0.75.sqrt(),
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::Chain => "chain",
            LatticeKind::Square => "square",
            LatticeKind::Hexagonal => "hexagonal",
            LatticeKind::Cubic => "cubic",
        }
    }

    /// Shells of shortest nonzero reciprocal vectors, ordered by length.
    ///
    /// Each shell is closed under every lattice-preserving isometry, so sums
    /// of `cos(2 pi k . x)` over a shell are invariant functions.
    pub fn reciprocal_shells(self, count: usize) -> Vec<Vec<[i32; 3]>> {
        let d = self.dim();
        let ginv = self.inverse_metric();
        let range = 3i32;
        let mut all: Vec<([i32; 3], f64)> = Vec::new();
        let mut k = [-range; 3];
        for i in d..3 {
            k[i] = 0;
        }
        loop {
            if k[..d].iter().any(|&c| c != 0) {
                all.push((k, quad_int(&ginv, &k, d)));
            }
            // odometer over the active axes
            let mut axis = 0;
            loop {
                if axis == d {
                    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                    let mut shells: Vec<Vec<[i32; 3]>> = Vec::new();
                    let mut last = f64::NEG_INFINITY;
                    for (v, n) in all {
                        if (n - last).abs() > 1e-9 {
                            if shells.len() == count {
                                return shells;
                            }
                            shells.push(Vec::new());
                            last = n;
                        }
                        shells.last_mut().unwrap().push(v);
                    }
                    return shells;
                }
                k[axis] += 1;
                if k[axis] > range {
                    k[axis] = -range;
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }
}

fn quad_int(m: &Mat3, k: &[i32; 3], d: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            s += k[a] as f64 * m[a][b] * k[b] as f64;
        }
    }
    s
}

/// The periodic simulation cell: a lattice family and its physical scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lattice: LatticeKind,
    /// Physical length of one lattice unit.
    pub scale: f64,
}

impl Cell {
    pub fn new(lattice: LatticeKind, scale: f64) -> Self {
        Cell { lattice, scale }
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// `G^-1 / L^2`: turns lattice-coordinate derivatives into physical ones.
    ///
    /// The physical Laplacian of `f` is `sum_ab K_ab d_a d_b f`.
    pub fn kinetic_metric(&self) -> Mat3 {
        let mut k = self.lattice.inverse_metric();
        let s = 1.0 / (self.scale * self.scale);
        for row in k.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        k
    }

    /// Physical volume of the supercell.
    pub fn volume(&self) -> f64 {
        self.lattice.unit_volume() * self.scale.powi(self.dim() as i32)
    }

    /// Squared physical length of a lattice-coordinate displacement.
    pub fn physical_norm2(&self, delta: &[f64]) -> f64 {
        let g = self.lattice.metric();
        let d = self.dim();
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += delta[a] * g[a][b] * delta[b];
            }
        }
        s * self.scale * self.scale
    }

    /// `|q|^2` for the reciprocal vector `q = 2 pi k` in physical units.
    pub fn reciprocal_norm2(&self, k: &[i32; 3]) -> f64 {
        let km = self.kinetic_metric();
        4.0 * core::f64::consts::PI * core::f64::consts::PI * quad_int(&km, k, self.dim())
    }
}

/// Reduces a coordinate into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Minimum-image displacement component in `[-1/2, 1/2]`.
#[inline]
pub fn min_image(dx: f64) -> f64 {
    dx - dx.round()
}

/// Minimum-image distance in lattice coordinates with the identity metric.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = min_image(x - y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `x^T M y` on the active `d x d` block.
#[inline]
pub fn bilinear(m: &Mat3, x: &[f64], y: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..d {
        let mut t = 0.0;
        for b in 0..d {
            t += m[a][b] * y[b];
        }
        s += x[a] * t;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_min_image() {
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.5), 0.5);
        assert_eq!(wrap(-1e-18), 0.0);
        assert!((min_image(0.9) + 0.1).abs() < 1e-15);
        assert!((torus_distance(&[0.05], &[0.95]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn shells() {
        let s = LatticeKind::Square.reciprocal_shells(2);
        assert_eq!(s[0].len(), 4);
        assert_eq!(s[1].len(), 4);
        let h = LatticeKind::Hexagonal.reciprocal_shells(2);
        assert_eq!(h[0].len(), 6);
        assert_eq!(h[1].len(), 6);
        let c = LatticeKind::Chain.reciprocal_shells(2);
        assert_eq!(c[0], alloc::vec![[-1, 0, 0], [1, 0, 0]]);
        assert_eq!(LatticeKind::Cubic.reciprocal_shells(2)[1].len(), 12);
    }

    #[test]
    fn hexagonal_metric_inverse() {
        let g = LatticeKind::Hexagonal.metric();
        let gi = LatticeKind::Hexagonal.inverse_metric();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| g[i][k] * gi[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
