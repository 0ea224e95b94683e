//! Smoothed step functions, the `lambda_eps` smoothers, fundamental regions
//! with a differentiable distance, and boundary weights for smoothed
//! canonicalization.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::groups::{Isometry, SpaceGroup};
use crate::lattice::{bilinear, wrap, LatticeKind, Mat3};

/// Which smoothed step function to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    /// Piecewise cubic spline, twice continuously differentiable.
    Spline2,
    /// `phi(w) / (phi(w) + phi(1 - w))` with `phi(w) = exp(-1/w)`, smooth.
    SmoothInf,
}

impl StepKind {
    pub fn name(self) -> &'static str {
        match self {
            StepKind::Spline2 => "spline2",
            StepKind::SmoothInf => "smooth_inf",
        }
    }

    pub fn parse(s: &str) -> Option<StepKind> {
        match s {
            "spline2" | "s2" => Some(StepKind::Spline2),
            "smooth_inf" | "sinf" | "s_inf" => Some(StepKind::SmoothInf),
            _ => None,
        }
    }
}

/// A smoother `lambda_eps` of the given kind and width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingSpec {
    pub kind: StepKind,
    pub epsilon: f64,
}

impl SmoothingSpec {
    pub fn new(kind: StepKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Invalid(alloc::format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(SmoothingSpec { kind, epsilon })
    }
}

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Step function value.
pub fn step(kind: StepKind, w: f64) -> f64 {
    step_derivs(kind, w)[0]
}

/// `(s, s', s'')` at `w`.
pub fn step_derivs(kind: StepKind, w: f64) -> [f64; 3] {
    if w <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if w >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    match kind {
        StepKind::Spline2 => {
            if w <= 1.0 / 3.0 {
                [4.5 * w * w * w, 13.5 * w * w, 27.0 * w]
            } else if w <= 2.0 / 3.0 {
                let a = 1.0 - w;
                let b = 2.0 - 3.0 * w;
                [
                    -4.5 * a * a * a + 0.5 * b * b * b + 1.0,
                    13.5 * a * a - 4.5 * b * b,
                    -27.0 * a + 27.0 * b,
                ]
            } else {
                let a = 1.0 - w;
                [-4.5 * a * a * a + 1.0, 13.5 * a * a, -27.0 * a]
            }
        }
        StepKind::SmoothInf => {
            let v = 1.0 - w;
            // s = 1 / (1 + e^z)
            let z = 1.0 / w - 1.0 / v;
            let (p, q) = if z > 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / ((1.0 + e) * (1.0 + e)))
            };
            if q == 0.0 {
                return [p, 0.0, 0.0];
            }
            let dz = -1.0 / (w * w) - 1.0 / (v * v);
            let ddz = 2.0 / (w * w * w) - 2.0 / (v * v * v);
            [p, -q * dz, (1.0 - 2.0 * p) * q * dz * dz - q * ddz]
        }
    }
}

/// `lambda_eps(w) = s(1 - w / eps)`.
pub fn lambda_eps(spec: &SmoothingSpec, w: f64) -> f64 {
    lambda_eps_derivs(spec, w)[0]
}

/// `(lambda, lambda', lambda'')` at `w`.
pub fn lambda_eps_derivs(spec: &SmoothingSpec, w: f64) -> [f64; 3] {
    let e = spec.epsilon;
    let [s, ds, dds] = step_derivs(spec.kind, 1.0 - w / e);
    [s, -ds / e, dds / (e * e)]
}

/// `s~(w) = w s(w)` and its first two derivatives.
fn soft_relu(kind: StepKind, w: f64) -> [f64; 3] {
    let [s, ds, dds] = step_derivs(kind, w);
    [w * s, s + w * ds, 2.0 * ds + w * dds]
}

/// A polytope `{x : (x - c)^T G n_l / n_l^T G n_l <= 1 for all l}`.
///
/// `normals[l]` runs from the center to the foot of face `l`, so its length
/// is the center-to-face distance. Inner products use the lattice metric `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalRegion {
    lattice: LatticeKind,
    center: [f64; 3],
    normals: Vec<[f64; 3]>,
}

/// Value, gradient and Hessian of the region distance with respect to `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceDerivs {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: Mat3,
}

impl FundamentalRegion {
    pub fn new(lattice: LatticeKind, center: &[f64], normals: &[Vec<f64>]) -> Result<Self> {
        let d = lattice.dim();
        if center.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: center.len() });
        }
        if normals.is_empty() {
            return Err(Error::Invalid("region needs at least one face".into()));
        }
        let mut c = [0.0; 3];
        c[..d].copy_from_slice(center);
        let mut ns = Vec::with_capacity(normals.len());
        let g = lattice.metric();
        for n in normals {
            if n.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: n.len() });
            }
            let mut v = [0.0; 3];
            v[..d].copy_from_slice(n);
            if !(bilinear(&g, &v, &v, d) > 0.0) {
                return Err(Error::Invalid("face normal must be nonzero".into()));
            }
            ns.push(v);
        }
        Ok(FundamentalRegion { lattice, center: c, normals: ns })
    }

    /// The interval `[lo, hi)` on the chain.
    pub fn interval(lo: f64, hi: f64) -> Self {
        let h = 0.5 * (hi - lo);
        FundamentalRegion::new(LatticeKind::Chain, &[lo + h], &[vec![h], vec![-h]]).expect("valid interval")
    }

    /// The axis-aligned unit cell of the lattice (square and cubic only).
    pub fn unit_box(lattice: LatticeKind) -> Self {
        let d = lattice.dim();
        let center = vec![0.5; d];
        let mut normals = Vec::new();
        for a in 0..d {
            for sgn in [0.5, -0.5] {
                let mut n = vec![0.0; d];
                n[a] = sgn;
                normals.push(n);
            }
        }
        FundamentalRegion::new(lattice, &center, &normals).expect("valid box")
    }

    /// Triangle `{0 <= y <= x <= 1/2}`, a fundamental region of the square
    /// lattice under `p4mm`; the center is its incenter.
    pub fn square_p4mm_triangle() -> Self {
        let r = (1.0 - core::f64::consts::FRAC_1_SQRT_2) / 2.0;
        let s = r * core::f64::consts::FRAC_1_SQRT_2;
        FundamentalRegion::new(
            LatticeKind::Square,
            &[0.5 - r, r],
            &[vec![0.0, -r], vec![r, 0.0], vec![-s, s]],
        )
        .expect("valid triangle")
    }

    /// Built-in region matching a built-in group name.
    pub fn for_builtin_group(name: &str) -> Option<Self> {
        match name {
            "chain-trivial" => Some(FundamentalRegion::interval(0.0, 1.0)),
            "chain-reflection" | "chain-half-translation" => Some(FundamentalRegion::interval(0.0, 0.5)),
            "chain-p2" => Some(FundamentalRegion::interval(0.0, 0.25)),
            "square-trivial" => Some(FundamentalRegion::unit_box(LatticeKind::Square)),
            "square-p4mm" => Some(FundamentalRegion::square_p4mm_triangle()),
            _ => None,
        }
    }

    pub fn lattice(&self) -> LatticeKind {
        self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim()]
    }

    pub fn normals(&self) -> impl Iterator<Item = &[f64]> {
        let d = self.dim();
        self.normals.iter().map(move |n| &n[..d])
    }

    /// Smallest center-to-face distance (lattice units at unit scale).
    pub fn inradius(&self) -> f64 {
        let g = self.lattice.metric();
        let d = self.dim();
        self.normals.iter().map(|n| bilinear(&g, n, n, d).sqrt()).fold(f64::INFINITY, f64::min)
    }

    /// Face coordinates `(x - c)^T G n_l / |n_l|^2 - 1`; all `<= 0` inside.
    pub fn face_coordinates(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let g = self.lattice.metric();
        let mut dx = [0.0; 3];
        for a in 0..d {
            dx[a] = x[a] - self.center[a];
        }
        self.normals.iter().map(|n| bilinear(&g, &dx, n, d) / bilinear(&g, n, n, d) - 1.0).collect()
    }

    pub fn contains_closure(&self, x: &[f64]) -> bool {
        self.face_coordinates(x).iter().all(|&w| w <= 0.0)
    }

    /// `d(x, Pi0)` with all derivatives with respect to `x`.
    pub fn distance_derivs(&self, kind: StepKind, x: &[f64]) -> DistanceDerivs {
        let d = self.dim();
        let g = self.lattice.metric();
        let mut dx = [0.0; 3];
        for a in 0..d {
            dx[a] = x[a] - self.center[a];
        }
        let mut out = DistanceDerivs { value: 0.0, grad: [0.0; 3], hess: [[0.0; 3]; 3] };
        for n in &self.normals {
            let nn = bilinear(&g, n, n, d);
            // gradient of the face coordinate: G n / |n|^2
            let mut a_l = [0.0; 3];
            for r in 0..d {
                a_l[r] = (0..d).map(|c| g[r][c] * n[c]).sum::<f64>() / nn;
            }
            let w = (0..d).map(|r| dx[r] * a_l[r]).sum::<f64>() - 1.0;
            let [t, dt, ddt] = soft_relu(kind, w);
            if t == 0.0 && dt == 0.0 {
                continue;
            }
            out.value += t * t;
            let c1 = 2.0 * t * dt;
            let c2 = 2.0 * (dt * dt + t * ddt);
            for r in 0..d {
                out.grad[r] += c1 * a_l[r];
                for c in 0..d {
                    out.hess[r][c] += c2 * a_l[r] * a_l[c];
                }
            }
        }
        out
    }
}

/// `d(x, g(Pi0))`, the smoothed distance from `x` to the image of the region.
///
/// Uses `d(x, g(Pi0)) = d(g^-1(x), Pi0)`, which is the region with center
/// `g(c0)` and face normals `A n_l`.
pub fn distance_to_region(region: &FundamentalRegion, kind: StepKind, x: &[f64], g: &Isometry) -> f64 {
    let mut y = [0.0; 3];
    g.inverse().apply(x, &mut y);
    region.distance_derivs(kind, &y).value
}

/// One group element (extended by a unit translation) in the boundary set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryMember {
    /// Index of the underlying group element.
    pub element: usize,
    /// The affine map `h` as applied to the unreduced position `x`.
    pub map: Isometry,
    /// `d(h(x), Pi0)`.
    pub distance: f64,
    /// Unnormalized weight `lambda_eps(d(h(x), Pi0))`.
    pub lambda: f64,
    /// Normalized weight.
    pub weight: f64,
}

/// The set `G_eps(x)` with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryWeights {
    pub members: Vec<BoundaryMember>,
}

impl BoundaryWeights {
    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|m| m.weight).sum()
    }
}

/// Enumerates `G_eps(x) = {h : d(h(x), Pi0) <= eps}` and its weights.
///
/// Candidates are every group element composed with the unit translations
/// that move `g(x mod 1)` into `[-1, 2)^d`. Members exactly at distance `eps`
/// are kept with weight zero.
pub fn boundary_set(
    region: &FundamentalRegion,
    spec: &SmoothingSpec,
    group: &SpaceGroup,
    x: &[f64],
) -> Result<BoundaryWeights> {
    let d = region.dim();
    if group.dim() != d || x.len() < d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len().min(group.dim()) });
    }
    let mut x0 = [0.0; 3];
    let mut s0 = [0.0; 3];
    for a in 0..d {
        x0[a] = wrap(x[a]);
        s0[a] = x0[a] - x[a];
    }
    let n_shift = 3usize.pow(d as u32);
    let mut members = Vec::new();
    let mut y = [0.0; 3];
    let mut rot_s0 = [0.0; 3];
    for (e, g) in group.elements().iter().enumerate() {
        g.apply(&x0, &mut y);
        g.rotate(&s0, &mut rot_s0);
        for code in 0..n_shift {
            let mut z = [0.0; 3];
            let mut b = [0.0; 3];
            let mut c = code;
            for a in 0..d {
                let t = (wrap(y[a]) - y[a]).round() + (c % 3) as f64 - 1.0;
                c /= 3;
                z[a] = y[a] + t;
                b[a] = g.translation_part()[a] + t + rot_s0[a];
            }
            let dist = region.distance_derivs(spec.kind, &z).value;
            if dist <= spec.epsilon {
                let map = g.with_translation(&b[..d]);
                members.push(BoundaryMember {
                    element: e,
                    map,
                    distance: dist,
                    lambda: lambda_eps(spec, dist),
                    weight: 0.0,
                });
            }
        }
    }
    let total: f64 = members.iter().map(|m| m.lambda).sum();
    if members.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyBoundarySet);
    }
    for m in members.iter_mut() {
        m.weight = m.lambda / total;
    }
    Ok(BoundaryWeights { members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const KINDS: [StepKind; 2] = [StepKind::Spline2, StepKind::SmoothInf];

    #[test]
    fn step_examples() {
        assert_relative_eq!(step(StepKind::SmoothInf, 0.5), 0.5, epsilon = 1e-15);
        assert_relative_eq!(step(StepKind::Spline2, 1.0 / 3.0), 1.0 / 6.0, epsilon = 1e-15);
        for k in KINDS {
            assert_eq!(step(k, -5.0), 0.0);
            assert_eq!(step(k, 5.0), 1.0);
        }
    }

    #[test]
    fn step_strictly_increasing() {
        for k in KINDS {
            let mut prev = 0.0;
            for i in 1..1000 {
                let v = step(k, i as f64 / 1000.0);
                // s_inf saturates in f64 near the ends
                if (50..950).contains(&i) {
                    assert!(v > prev, "{k:?} at {i}");
                } else {
                    assert!(v >= prev, "{k:?} at {i}");
                }
                prev = v;
            }
        }
    }

    #[test]
    fn lambda_examples() {
        for k in KINDS {
            let spec = SmoothingSpec::new(k, 0.1).unwrap();
            assert_eq!(lambda_eps(&spec, 0.0), 1.0);
            assert_eq!(lambda_eps(&spec, 0.1), 0.0);
            assert_eq!(lambda_eps_derivs(&spec, -1.0), [1.0, 0.0, 0.0]);
            assert_eq!(lambda_eps_derivs(&spec, 1.1), [0.0, 0.0, 0.0]);
        }
        let eps = 0.3;
        let spec = SmoothingSpec::new(StepKind::Spline2, eps).unwrap();
        assert_relative_eq!(lambda_eps(&spec, eps / 3.0), 5.0 / 6.0, epsilon = 1e-14);
        let spec = SmoothingSpec::new(StepKind::SmoothInf, eps).unwrap();
        assert_relative_eq!(lambda_eps(&spec, eps / 2.0), 0.5, epsilon = 1e-14);
        assert!(SmoothingSpec::new(StepKind::Spline2, 0.0).is_err());
    }

    #[test]
    fn lambda_derivatives_match_finite_differences() {
        let h = 1e-6;
        for k in KINDS {
            let spec = SmoothingSpec::new(k, 0.1).unwrap();
            let breaks = [0.0, 0.1 / 3.0, 0.2 / 3.0, 0.1];
            for i in 1..200 {
                let w = -0.02 + 0.14 * i as f64 / 200.0;
                if breaks.iter().any(|b| (w - b).abs() < 1e-4) {
                    continue;
                }
                let [_, d1, d2] = lambda_eps_derivs(&spec, w);
                let fd1 = (lambda_eps(&spec, w + h) - lambda_eps(&spec, w - h)) / (2.0 * h);
                let fd2 = (lambda_eps_derivs(&spec, w + h)[1] - lambda_eps_derivs(&spec, w - h)[1]) / (2.0 * h);
                assert!((d1 - fd1).abs() <= 1e-6 * d1.abs().max(1.0), "{k:?} w={w} {d1} {fd1}");
                assert!((d2 - fd2).abs() <= 1e-6 * d2.abs().max(1.0), "{k:?} w={w} {d2} {fd2}");
            }
        }
    }

    #[test]
    fn lambda_derivative_blowup() {
        for k in KINDS {
            for eps in [0.1, 0.01] {
                let spec = SmoothingSpec::new(k, eps).unwrap();
                let (mut m1, mut m2) = (0.0f64, 0.0f64);
                for i in 0..=10_000 {
                    let [_, d1, d2] = lambda_eps_derivs(&spec, eps * i as f64 / 10_000.0);
                    m1 = m1.max(d1.abs());
                    m2 = m2.max(d2.abs());
                }
                assert!(m1 >= 1.0 / eps && m2 >= 1.0 / (eps * eps), "{k:?} {eps}");
            }
        }
    }

    #[test]
    fn interval_distance_examples() {
        let r = FundamentalRegion::interval(0.0, 1.0);
        let id = Isometry::identity(1);
        for k in KINDS {
            assert_eq!(distance_to_region(&r, k, &[0.4], &id), 0.0);
            assert_relative_eq!(distance_to_region(&r, k, &[1.5], &id), 1.0, epsilon = 1e-15);
            // the printed 1d formula: s~(2(x-1))^2 + s~(-2x)^2
            for x in [-0.3, -0.05, 1.02, 1.3] {
                let st = |w: f64| w * step(k, w);
                let expect = st(2.0 * (x - 1.0)).powi(2) + st(-2.0 * x).powi(2);
                assert_relative_eq!(distance_to_region(&r, k, &[x], &id), expect, epsilon = 1e-15);
            }
        }
        // isometry compatibility with a unit translation
        let g = Isometry::translation(&[-1.0]);
        let mut gx = [0.0];
        g.apply(&[-0.2], &mut gx);
        assert_relative_eq!(
            distance_to_region(&r, StepKind::Spline2, &gx, &g),
            distance_to_region(&r, StepKind::Spline2, &[-0.2], &id),
            epsilon = 1e-15
        );
    }

    #[test]
    fn distance_isometry_compatibility() {
        let region = FundamentalRegion::square_p4mm_triangle();
        let group = SpaceGroup::builtin("square-p4mm").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = [rng.random::<f64>() * 1.4 - 0.2, rng.random::<f64>() * 1.4 - 0.2];
            for g in group.elements() {
                let mut gx = [0.0; 3];
                g.apply(&x, &mut gx);
                for k in KINDS {
                    let a = distance_to_region(&region, k, &gx, g);
                    let b = distance_to_region(&region, k, &x, &Isometry::identity(2));
                    assert!((a - b).abs() <= 1e-12, "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn distance_zero_iff_inside() {
        let region = FundamentalRegion::square_p4mm_triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let inside = x[1] <= x[0] && x[0] <= 0.5;
            let dist = region.distance_derivs(StepKind::Spline2, &x).value;
            assert_eq!(dist == 0.0, inside, "{x:?}");
            assert_eq!(region.contains_closure(&x), inside);
        }
    }

    #[test]
    fn distance_derivatives_match_finite_differences() {
        let region = FundamentalRegion::square_p4mm_triangle();
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in KINDS {
            for _ in 0..200 {
                let x = [rng.random::<f64>() * 1.2 - 0.1, rng.random::<f64>() * 1.2 - 0.1];
                let dd = region.distance_derivs(k, &x);
                for a in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[a] += h;
                    xm[a] -= h;
                    let fp = region.distance_derivs(k, &xp);
                    let fm = region.distance_derivs(k, &xm);
                    let g = (fp.value - fm.value) / (2.0 * h);
                    assert!((g - dd.grad[a]).abs() <= 1e-6 * dd.grad[a].abs().max(1.0));
                    for b in 0..2 {
                        let hb = (fp.grad[b] - fm.grad[b]) / (2.0 * h);
                        assert!((hb - dd.hess[a][b]).abs() <= 1e-5 * dd.hess[a][b].abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_set_1d_examples() {
        let region = FundamentalRegion::interval(0.0, 1.0);
        let group = SpaceGroup::builtin("chain-trivial").unwrap();
        for k in KINDS {
            let spec = SmoothingSpec::new(k, 0.05).unwrap();
            let bw = boundary_set(&region, &spec, &group, &[0.5]).unwrap();
            assert_eq!(bw.members.len(), 1);
            assert_eq!(bw.members[0].weight, 1.0);
            assert_eq!(bw.members[0].map, Isometry::identity(1));

            let bw = boundary_set(&region, &spec, &group, &[0.0]).unwrap();
            let shifts: Vec<f64> = bw.members.iter().map(|m| m.map.translation_part()[0]).collect();
            assert_eq!(shifts, vec![0.0, 1.0]);
            assert!(bw.members.iter().all(|m| (m.weight - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn boundary_set_tie_at_epsilon_has_zero_weight() {
        let region = FundamentalRegion::interval(0.0, 1.0);
        let group = SpaceGroup::builtin("chain-trivial").unwrap();
        // eps equal to the distance of the -1 translate
        let kind = StepKind::Spline2;
        let x = 0.97;
        let eps = region.distance_derivs(kind, &[x - 1.0]).value;
        let spec = SmoothingSpec::new(kind, eps).unwrap();
        let bw = boundary_set(&region, &spec, &group, &[x]).unwrap();
        let tie = bw.members.iter().find(|m| m.distance == eps).expect("tie member present");
        assert_eq!(tie.weight, 0.0);
        assert!((bw.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_weights_partition_of_unity() {
        let cases: [(&str, usize); 4] =
            [("chain-trivial", 1), ("chain-reflection", 1), ("chain-p2", 1), ("square-p4mm", 2)];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (name, d) in cases {
            let group = SpaceGroup::builtin(name).unwrap();
            let region = FundamentalRegion::for_builtin_group(name).unwrap();
            for k in KINDS {
                let spec = SmoothingSpec::new(k, 0.05).unwrap();
                for _ in 0..500 {
                    let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect();
                    let bw = boundary_set(&region, &spec, &group, &x).unwrap();
                    assert!((bw.total_weight() - 1.0).abs() <= 1e-12);
                    for m in &bw.members {
                        assert!(m.weight >= 0.0 && m.distance <= spec.epsilon);
                        let mut y = [0.0; 3];
                        m.map.apply(&x, &mut y);
                        let dist = region.distance_derivs(k, &y).value;
                        assert!((dist - m.distance).abs() < 1e-12);
                    }
                }
            }
        }
    }

    /// Brute force over a wider translation shell finds nothing the
    /// enumeration misses.
    #[test]
    fn boundary_enumeration_is_complete() {
        let group = SpaceGroup::builtin("square-p4mm").unwrap();
        let region = FundamentalRegion::square_p4mm_triangle();
        let spec = SmoothingSpec::new(StepKind::Spline2, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let bw = boundary_set(&region, &spec, &group, &x).unwrap();
            let mut brute = 0;
            for g in group.elements() {
                let mut y = [0.0; 3];
                g.apply(&x, &mut y);
                for tx in -4..=4 {
                    for ty in -4..=4 {
                        let z = [y[0] + tx as f64, y[1] + ty as f64];
                        if region.distance_derivs(spec.kind, &z).value <= spec.epsilon {
                            brute += 1;
                        }
                    }
                }
            }
            assert_eq!(brute, bw.members.len());
        }
    }

    /// Exactly one extended element maps a generic point into the closed region.
    #[test]
    fn fundamental_domain_property() {
        let cases = ["chain-trivial", "chain-reflection", "chain-half-translation", "chain-p2", "square-p4mm"];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for name in cases {
            let group = SpaceGroup::builtin(name).unwrap();
            let region = FundamentalRegion::for_builtin_group(name).unwrap();
            let d = group.dim();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let mut hits = 0;
                let mut near_tie = false;
                for g in group.elements() {
                    let mut y = [0.0; 3];
                    g.apply(&x, &mut y);
                    let n_shift = 5i32.pow(d as u32);
                    for code in 0..n_shift {
                        let mut z = y;
                        let mut c = code;
                        for a in 0..d {
                            z[a] += (c % 5 - 2) as f64;
                            c /= 5;
                        }
                        let faces = region.face_coordinates(&z);
                        let worst = faces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        if worst <= 0.0 {
                            hits += 1;
                        }
                        if worst.abs() < 1e-9 {
                            near_tie = true;
                        }
                    }
                }
                assert!(hits == 1 || near_tie, "{name} {x:?} hits={hits}");
            }
        }
    }

    #[test]
    fn weighted_sum_is_continuous_across_shell() {
        // fixed arbitrary values per extended element, scanned across x = 0
        let region = FundamentalRegion::interval(0.0, 0.5);
        let group = SpaceGroup::builtin("chain-reflection").unwrap();
        for k in KINDS {
            let spec = SmoothingSpec::new(k, 0.05).unwrap();
            let value = |m: &BoundaryMember| {
                1.0 + m.element as f64 * 0.7 + m.map.translation_part()[0] * 0.3
            };
            let scan = |n: usize| {
                let mut prev: Option<f64> = None;
                let mut jump = 0.0f64;
                for i in 0..=n {
                    let x = -0.3 + 0.6 * i as f64 / n as f64;
                    let bw = boundary_set(&region, &spec, &group, &[x]).unwrap();
                    let v: f64 = bw.members.iter().map(|m| m.weight * value(m)).sum();
                    if let Some(p) = prev {
                        jump = jump.max((v - p).abs());
                    }
                    prev = Some(v);
                }
                jump
            };
            let j1 = scan(1000);
            let j2 = scan(2000);
            let j3 = scan(4000);
            assert!(j2 < 0.75 * j1 && j3 < 0.75 * j2, "{k:?} {j1} {j2} {j3}");
        }
    }

    #[test]
    fn inradius_values() {
        assert_relative_eq!(FundamentalRegion::interval(0.0, 0.5).inradius(), 0.25);
        assert_relative_eq!(
            FundamentalRegion::square_p4mm_triangle().inradius(),
            (1.0 - core::f64::consts::FRAC_1_SQRT_2) / 2.0,
            epsilon = 1e-15
        );
    }
}
