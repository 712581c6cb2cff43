//! Analytic closed manifolds with exact geodesics and closed-form spectra.
//!
//! Three model spaces ship: the round circle, the round 2-sphere and the flat
//! 2-torus. Each exposes its geodesic distance, a sampler for the normalized
//! Riemannian volume, and the spectrum of the (nonnegative) Laplace-Beltrami
//! operator together with a real orthonormal eigenbasis. Orthonormality is
//! with respect to the unnormalized volume measure, so `vol(M) * f^2`
//! integrates the square of a mode `f` to one only when `f = 1/sqrt(vol)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::{cmp_real, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ManifoldKind<T> {
    Circle { radius: T },
    Sphere2 { radius: T },
    FlatTorus2 { side_a: T, side_b: T },
}

/// An immutable closed Riemannian manifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManifoldModel<T> {
    kind: ManifoldKind<T>,
}

/// A point in embedding coordinates.
///
/// Circle points are `(R cos t, R sin t)`, sphere points are 3-vectors of norm
/// `R`, torus points are the two angles reduced into `[0,a) x [0,b)`. Unused
/// trailing coordinates are zero.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ManifoldPoint<T> {
    pub coords: [T; 3],
}

impl<T: Real> ManifoldPoint<T> {
    pub fn new(coords: [T; 3]) -> Self {
        Self { coords }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    #[inline]
    fn eval<T: Real>(self, x: T) -> T {
        match self {
            Trig::Cos => x.cos(),
            Trig::Sin => x.sin(),
        }
    }
}

/// Identifies one member of the real eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeLabel {
    /// `cos(p t)` or `sin(p t)`; `p = 0` is the constant mode.
    Circle { p: u32, branch: Trig },
    /// Real spherical harmonic of degree `l`; `m < 0` selects the sine branch.
    Sphere { l: u32, m: i32 },
    /// `trig_x(2 pi p x / a) * trig_y(2 pi q y / b)`.
    Torus { p: u32, q: u32, x: Trig, y: Trig },
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ModeLabel::Circle { p, branch } => write!(f, "circle(p={p},{branch:?})"),
            ModeLabel::Sphere { l, m } => write!(f, "Y(l={l},m={m})"),
            ModeLabel::Torus { p, q, x, y } => write!(f, "torus(p={p},q={q},{x:?},{y:?})"),
        }
    }
}

/// First eigenvalues of the Laplace-Beltrami operator, multiplicities expanded.
///
/// Stored 0-based: `eigenvalues[0]` is the constant mode's `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSpectrum<T> {
    pub eigenvalues: Vec<T>,
    pub labels: Vec<ModeLabel>,
}

impl<T: Real> ExactSpectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Groups equal eigenvalues (relative tolerance `1e-9`) into contiguous
    /// 0-based index ranges.
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        let tol = T::lit(1e-9);
        let mut out = Vec::new();
        let mut start = 0;
        for a in 1..=self.eigenvalues.len() {
            let split = a == self.eigenvalues.len() || {
                let (prev, next) = (self.eigenvalues[a - 1], self.eigenvalues[a]);
                (next - prev).abs() > tol * T::one().max(prev.abs())
            };
            if split {
                out.push(start..a);
                start = a;
            }
        }
        out
    }
}

impl<T: Real> ManifoldModel<T> {
    pub fn circle(radius: T) -> Result<Self> {
        check_positive("circle radius", radius)?;
        Ok(Self {
            kind: ManifoldKind::Circle { radius },
        })
    }

    pub fn sphere2(radius: T) -> Result<Self> {
        check_positive("sphere radius", radius)?;
        Ok(Self {
            kind: ManifoldKind::Sphere2 { radius },
        })
    }

    pub fn flat_torus2(side_a: T, side_b: T) -> Result<Self> {
        check_positive("torus side a", side_a)?;
        check_positive("torus side b", side_b)?;
        Ok(Self {
            kind: ManifoldKind::FlatTorus2 { side_a, side_b },
        })
    }

    pub fn kind(&self) -> ManifoldKind<T> {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle { .. } => 1,
            _ => 2,
        }
    }

    /// Number of stored embedding coordinates.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere2 { .. } => 3,
            _ => 2,
        }
    }

    pub fn volume(&self) -> T {
        let two_pi = T::TAU();
        match self.kind {
            ManifoldKind::Circle { radius } => two_pi * radius,
            ManifoldKind::Sphere2 { radius } => T::lit(2.0) * two_pi * radius * radius,
            ManifoldKind::FlatTorus2 { side_a, side_b } => side_a * side_b,
        }
    }

    pub fn diameter(&self) -> T {
        match self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere2 { radius } => T::PI() * radius,
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                (side_a * side_a + side_b * side_b).sqrt() / T::lit(2.0)
            }
        }
    }

    pub fn injectivity_radius(&self) -> T {
        match self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere2 { radius } => T::PI() * radius,
            ManifoldKind::FlatTorus2 { side_a, side_b } => side_a.min(side_b) / T::lit(2.0),
        }
    }

    /// Volume of the Euclidean unit ball in the manifold's dimension.
    pub fn unit_ball_volume(&self) -> T {
        unit_ball_volume(self.dimension())
    }

    /// Exact geodesic distance.
    pub fn distance(&self, x: &ManifoldPoint<T>, y: &ManifoldPoint<T>) -> T {
        match self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere2 { radius } => {
                let [a0, a1, a2] = x.coords;
                let [b0, b1, b2] = y.coords;
                // atan2(|x cross y|, x . y) is the arccos of the normalized inner
                // product without its loss of precision near 0 and pi.
                let cx = a1 * b2 - a2 * b1;
                let cy = a2 * b0 - a0 * b2;
                let cz = a0 * b1 - a1 * b0;
                let cross = (cx * cx + cy * cy + cz * cz).sqrt();
                radius * cross.atan2(a0 * b0 + a1 * b1 + a2 * b2)
            }
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                let dx = wrap_delta(x.coords[0] - y.coords[0], side_a);
                let dy = wrap_delta(x.coords[1] - y.coords[1], side_b);
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    /// Squared Euclidean distance in the (periodic, for the torus) embedding.
    /// It never exceeds the squared geodesic distance.
    #[inline]
    pub(crate) fn chord_sq(&self, x: &ManifoldPoint<T>, y: &ManifoldPoint<T>) -> T {
        match self.kind {
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                let dx = wrap_delta(x.coords[0] - y.coords[0], side_a);
                let dy = wrap_delta(x.coords[1] - y.coords[1], side_b);
                dx * dx + dy * dy
            }
            _ => {
                let d0 = x.coords[0] - y.coords[0];
                let d1 = x.coords[1] - y.coords[1];
                let d2 = x.coords[2] - y.coords[2];
                d0 * d0 + d1 * d1 + d2 * d2
            }
        }
    }

    /// Chord length corresponding to geodesic length `r` (`r <= pi R`).
    #[inline]
    pub(crate) fn chord_of(&self, r: T) -> T {
        match self.kind {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere2 { radius } => {
                if r >= T::PI() * radius {
                    T::lit(2.0) * radius
                } else {
                    T::lit(2.0) * radius * (r / (T::lit(2.0) * radius)).sin()
                }
            }
            ManifoldKind::FlatTorus2 { .. } => r,
        }
    }

    /// Coordinate periods for the neighbor grid (`None` = not periodic).
    pub(crate) fn periods(&self) -> [Option<T>; 3] {
        match self.kind {
            ManifoldKind::FlatTorus2 { side_a, side_b } => [Some(side_a), Some(side_b), None],
            _ => [None, None, None],
        }
    }

    /// True if `p` is a valid point of this manifold up to `tol`.
    pub fn contains(&self, p: &ManifoldPoint<T>, tol: T) -> bool {
        let [c0, c1, c2] = p.coords;
        if !(c0.is_finite() && c1.is_finite() && c2.is_finite()) {
            return false;
        }
        match self.kind {
            ManifoldKind::Circle { radius } => {
                c2 == T::zero() && ((c0 * c0 + c1 * c1).sqrt() - radius).abs() <= tol
            }
            ManifoldKind::Sphere2 { radius } => {
                ((c0 * c0 + c1 * c1 + c2 * c2).sqrt() - radius).abs() <= tol
            }
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                c2 == T::zero() && c0 >= T::zero() && c0 < side_a && c1 >= T::zero() && c1 < side_b
            }
        }
    }

    /// Builds a point from its first `ambient_dim()` coordinates, projecting
    /// onto the manifold (normalizing or reducing modulo the periods).
    pub fn point_from_slice(&self, c: &[T]) -> Result<ManifoldPoint<T>> {
        if c.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: c.len(),
            });
        }
        let p = match self.kind {
            ManifoldKind::Circle { radius } => {
                let n = (c[0] * c[0] + c[1] * c[1]).sqrt();
                if n == T::zero() {
                    return Err(Error::InvalidParameter("zero vector on the circle".into()));
                }
                [c[0] / n * radius, c[1] / n * radius, T::zero()]
            }
            ManifoldKind::Sphere2 { radius } => {
                let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                if n == T::zero() {
                    return Err(Error::InvalidParameter("zero vector on the sphere".into()));
                }
                [c[0] / n * radius, c[1] / n * radius, c[2] / n * radius]
            }
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                [reduce(c[0], side_a), reduce(c[1], side_b), T::zero()]
            }
        };
        Ok(ManifoldPoint::new(p))
    }

    /// Deterministic points such that every point of the manifold lies within
    /// geodesic distance `s` of one of them.
    pub(crate) fn covering_grid(&self, s: T) -> Vec<ManifoldPoint<T>> {
        let two = T::lit(2.0);
        match self.kind {
            ManifoldKind::Circle { radius } => {
                let g = (T::PI() * radius / s).ceil().to_usize().unwrap_or(1).max(3);
                (0..g)
                    .map(|j| {
                        let t = T::TAU() * T::from_usize_lossy(j) / T::from_usize_lossy(g);
                        ManifoldPoint::new([radius * t.cos(), radius * t.sin(), T::zero()])
                    })
                    .collect()
            }
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                // Cell sides at most s*sqrt(2), so half-diagonals are at most s.
                let step = s * two.sqrt();
                let gx = (side_a / step).ceil().to_usize().unwrap_or(1).max(1);
                let gy = (side_b / step).ceil().to_usize().unwrap_or(1).max(1);
                let (hx, hy) = (
                    side_a / T::from_usize_lossy(gx),
                    side_b / T::from_usize_lossy(gy),
                );
                let half = T::lit(0.5);
                let mut out = Vec::with_capacity(gx * gy);
                for i in 0..gx {
                    for j in 0..gy {
                        let x = (T::from_usize_lossy(i) + half) * hx;
                        let y = (T::from_usize_lossy(j) + half) * hy;
                        out.push(ManifoldPoint::new([x, y, T::zero()]));
                    }
                }
                out
            }
            ManifoldKind::Sphere2 { radius } => {
                // Square grids of spacing 2/g on the faces of [-1, 1]^3, pushed
                // radially onto the sphere. Radial projection of points outside
                // the unit ball is 1-Lipschitz, so chords are at most sqrt(2)/g.
                let g = (T::one() / (two.sqrt() * (s / (two * radius)).sin()))
                    .ceil()
                    .to_usize()
                    .unwrap_or(1)
                    .max(1);
                let h = two / T::from_usize_lossy(g);
                let mut out = Vec::with_capacity(6 * (g + 1) * (g + 1));
                for axis in 0..3 {
                    for sign in [-T::one(), T::one()] {
                        for i in 0..=g {
                            for j in 0..=g {
                                let u = -T::one() + h * T::from_usize_lossy(i);
                                let v = -T::one() + h * T::from_usize_lossy(j);
                                let mut c = [T::zero(); 3];
                                c[axis] = sign;
                                c[(axis + 1) % 3] = u;
                                c[(axis + 2) % 3] = v;
                                let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                                let k = radius / n;
                                out.push(ManifoldPoint::new([c[0] * k, c[1] * k, c[2] * k]));
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Points equidistant from `dimension() + 1` sites, computed in the chart
    /// around `near`: arc midpoints on the circle, circumcenter poles on the
    /// sphere, planar circumcenters on the torus. Degenerate sites give none.
    pub(crate) fn equidistant_points(
        &self,
        sites: &[ManifoldPoint<T>],
        near: &ManifoldPoint<T>,
    ) -> Vec<ManifoldPoint<T>> {
        let tiny = T::epsilon().sqrt();
        match self.kind {
            ManifoldKind::Circle { radius } => {
                let [a, b] = [sites[0].coords, sites[1].coords];
                let (mut x, mut y) = (a[0] + b[0], a[1] + b[1]);
                let mut n = (x * x + y * y).sqrt();
                if n <= tiny * radius {
                    (x, y, n) = (-a[1], a[0], radius);
                }
                let k = radius / n;
                vec![
                    ManifoldPoint::new([x * k, y * k, T::zero()]),
                    ManifoldPoint::new([-x * k, -y * k, T::zero()]),
                ]
            }
            ManifoldKind::Sphere2 { radius } => {
                let [a, b, c] = [sites[0].coords, sites[1].coords, sites[2].coords];
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let w = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
                if n <= tiny * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) {
                    return Vec::new();
                }
                let k = radius / n;
                vec![
                    ManifoldPoint::new([w[0] * k, w[1] * k, w[2] * k]),
                    ManifoldPoint::new([-w[0] * k, -w[1] * k, -w[2] * k]),
                ]
            }
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                // Sites unwrapped relative to `near`.
                let rel = |p: &ManifoldPoint<T>| {
                    (
                        signed_wrap(p.coords[0] - near.coords[0], side_a),
                        signed_wrap(p.coords[1] - near.coords[1], side_b),
                    )
                };
                let (a, b, c) = (rel(&sites[0]), rel(&sites[1]), rel(&sites[2]));
                let d = T::lit(2.0) * (a.0 * (b.1 - c.1) + b.0 * (c.1 - a.1) + c.0 * (a.1 - b.1));
                let scale = (b.0 - a.0)
                    .abs()
                    .max((b.1 - a.1).abs())
                    .max((c.0 - a.0).abs())
                    .max((c.1 - a.1).abs());
                if d.abs() <= tiny * scale * scale {
                    return Vec::new();
                }
                let (sa, sb, sc) = (
                    a.0 * a.0 + a.1 * a.1,
                    b.0 * b.0 + b.1 * b.1,
                    c.0 * c.0 + c.1 * c.1,
                );
                let ux = (sa * (b.1 - c.1) + sb * (c.1 - a.1) + sc * (a.1 - b.1)) / d;
                let uy = (sa * (c.0 - b.0) + sb * (a.0 - c.0) + sc * (b.0 - a.0)) / d;
                vec![ManifoldPoint::new([
                    reduce(near.coords[0] + ux, side_a),
                    reduce(near.coords[1] + uy, side_b),
                    T::zero(),
                ])]
            }
        }
    }

    /// I.i.d. draws from the normalized volume measure.
    pub fn uniform_sample(
        &self,
        rng: &mut SeededRng,
        count: usize,
    ) -> Result<Vec<ManifoldPoint<T>>> {
        if count == 0 {
            return Err(Error::InvalidParameter(
                "sample count must be at least 1".into(),
            ));
        }
        Ok((0..count).map(|_| self.sample_one(rng)).collect())
    }

    pub(crate) fn sample_one(&self, rng: &mut SeededRng) -> ManifoldPoint<T> {
        match self.kind {
            ManifoldKind::Circle { radius } => {
                let t = T::TAU() * rng.unit::<T>();
                ManifoldPoint::new([radius * t.cos(), radius * t.sin(), T::zero()])
            }
            ManifoldKind::Sphere2 { radius } => loop {
                let g: [T; 3] = [rng.normal(), rng.normal(), rng.normal()];
                let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                if n > T::lit(1e-12) {
                    let s = radius / n;
                    break ManifoldPoint::new([g[0] * s, g[1] * s, g[2] * s]);
                }
            },
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                let x = reduce(side_a * rng.unit::<T>(), side_a);
                let y = reduce(side_b * rng.unit::<T>(), side_b);
                ManifoldPoint::new([x, y, T::zero()])
            }
        }
    }

    /// First `k_max` eigenvalues, ascending, with mode labels.
    pub fn exact_spectrum(&self, k_max: usize) -> Result<ExactSpectrum<T>> {
        if k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be at least 1".into()));
        }
        let mut modes: Vec<(T, ModeLabel)> = Vec::with_capacity(k_max);
        match self.kind {
            ManifoldKind::Circle { radius } => {
                modes.push((
                    T::zero(),
                    ModeLabel::Circle {
                        p: 0,
                        branch: Trig::Cos,
                    },
                ));
                let mut p = 1u32;
                while modes.len() < k_max {
                    let lam = T::from_u32(p * p).unwrap() / (radius * radius);
                    for branch in [Trig::Cos, Trig::Sin] {
                        modes.push((lam, ModeLabel::Circle { p, branch }));
                    }
                    p += 1;
                }
            }
            ManifoldKind::Sphere2 { radius } => {
                let mut l = 0u32;
                while modes.len() < k_max {
                    let lam = T::from_u32(l * (l + 1)).unwrap() / (radius * radius);
                    for m in -(l as i32)..=(l as i32) {
                        modes.push((lam, ModeLabel::Sphere { l, m }));
                    }
                    l += 1;
                }
            }
            ManifoldKind::FlatTorus2 { side_a, side_b } => {
                let lam = |p: u32, q: u32| {
                    let fp = T::from_u32(p).unwrap() / side_a;
                    let fq = T::from_u32(q).unwrap() / side_b;
                    T::lit(4.0) * T::PI() * T::PI() * (fp * fp + fq * fq)
                };
                let mut pmax = 4u32;
                loop {
                    modes.clear();
                    for p in 0..=pmax {
                        for q in 0..=pmax {
                            let xs: &[Trig] = if p == 0 {
                                &[Trig::Cos]
                            } else {
                                &[Trig::Cos, Trig::Sin]
                            };
                            let ys: &[Trig] = if q == 0 {
                                &[Trig::Cos]
                            } else {
                                &[Trig::Cos, Trig::Sin]
                            };
                            for &x in xs {
                                for &y in ys {
                                    modes.push((lam(p, q), ModeLabel::Torus { p, q, x, y }));
                                }
                            }
                        }
                    }
                    modes.sort_by(|a, b| cmp_real(a.0, b.0).then(a.1.cmp(&b.1)));
                    // Any frequency beyond pmax has eigenvalue at least `bound`.
                    let longest = side_a.max(side_b);
                    let f = T::from_u32(pmax + 1).unwrap() / longest;
                    let bound = T::lit(4.0) * T::PI() * T::PI() * f * f;
                    if modes.len() >= k_max && modes[k_max - 1].0 < bound {
                        break;
                    }
                    pmax *= 2;
                }
            }
        }
        modes.truncate(k_max);
        let (eigenvalues, labels) = modes.into_iter().unzip();
        Ok(ExactSpectrum {
            eigenvalues,
            labels,
        })
    }

    /// Eigenvalue of the mode `label` (validated).
    pub fn mode_eigenvalue(&self, label: ModeLabel) -> Result<T> {
        self.validate_label(label)?;
        Ok(match (self.kind, label) {
            (ManifoldKind::Circle { radius }, ModeLabel::Circle { p, .. }) => {
                T::from_u32(p * p).unwrap() / (radius * radius)
            }
            (ManifoldKind::Sphere2 { radius }, ModeLabel::Sphere { l, .. }) => {
                T::from_u32(l * (l + 1)).unwrap() / (radius * radius)
            }
            (ManifoldKind::FlatTorus2 { side_a, side_b }, ModeLabel::Torus { p, q, .. }) => {
                let fp = T::from_u32(p).unwrap() / side_a;
                let fq = T::from_u32(q).unwrap() / side_b;
                T::lit(4.0) * T::PI() * T::PI() * (fp * fp + fq * fq)
            }
            _ => unreachable!("validated above"),
        })
    }

    fn validate_label(&self, label: ModeLabel) -> Result<()> {
        let ok = match (self.kind, label) {
            (ManifoldKind::Circle { .. }, ModeLabel::Circle { p, branch }) => {
                p > 0 || branch == Trig::Cos
            }
            (ManifoldKind::Sphere2 { .. }, ModeLabel::Sphere { l, m }) => m.unsigned_abs() <= l,
            (ManifoldKind::FlatTorus2 { .. }, ModeLabel::Torus { p, q, x, y }) => {
                (p > 0 || x == Trig::Cos) && (q > 0 || y == Trig::Cos)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnknownMode(format!("{label} on {self}")))
        }
    }

    /// Value of the unit-norm real eigenfunction `label` at `x`.
    pub fn eval_eigenfunction(&self, label: ModeLabel, x: &ManifoldPoint<T>) -> Result<T> {
        self.validate_label(label)?;
        let two = T::lit(2.0);
        Ok(match (self.kind, label) {
            (ManifoldKind::Circle { radius }, ModeLabel::Circle { p, branch }) => {
                if p == 0 {
                    T::one() / (T::TAU() * radius).sqrt()
                } else {
                    let t = x.coords[1].atan2(x.coords[0]);
                    branch.eval(T::from_u32(p).unwrap() * t) / (T::PI() * radius).sqrt()
                }
            }
            (ManifoldKind::Sphere2 { radius }, ModeLabel::Sphere { l, m }) => {
                let [c0, c1, c2] = x.coords;
                let z = (c2 / radius).max(-T::one()).min(T::one());
                let phi = c1.atan2(c0);
                let am = m.unsigned_abs();
                let p = normalized_legendre(l, am, z);
                let ang = match m.cmp(&0) {
                    std::cmp::Ordering::Equal => T::one(),
                    std::cmp::Ordering::Greater => {
                        two.sqrt() * (T::from_u32(am).unwrap() * phi).cos()
                    }
                    std::cmp::Ordering::Less => two.sqrt() * (T::from_u32(am).unwrap() * phi).sin(),
                };
                p * ang / radius
            }
            (
                ManifoldKind::FlatTorus2 { side_a, side_b },
                ModeLabel::Torus { p, q, x: bx, y: by },
            ) => {
                let mut norm = T::one() / (side_a * side_b).sqrt();
                if p > 0 {
                    norm *= two.sqrt();
                }
                if q > 0 {
                    norm *= two.sqrt();
                }
                let ax = T::TAU() * T::from_u32(p).unwrap() * x.coords[0] / side_a;
                let ay = T::TAU() * T::from_u32(q).unwrap() * x.coords[1] / side_b;
                norm * bx.eval(ax) * by.eval(ay)
            }
            _ => unreachable!("validated above"),
        })
    }
}

/// Fully normalized associated Legendre function
/// `sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(z)` without the Condon-Shortley phase.
fn normalized_legendre<T: Real>(l: u32, m: u32, z: T) -> T {
    let s = (T::one() - z * z).max(T::zero()).sqrt();
    let mut pmm = T::one() / (T::lit(4.0) * T::PI()).sqrt();
    for i in 1..=m {
        let fi = T::from_u32(i).unwrap();
        pmm *= ((T::lit(2.0) * fi + T::one()) / (T::lit(2.0) * fi)).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let fm = T::from_u32(m).unwrap();
    let mut p_prev = pmm;
    let mut p_cur = z * (T::lit(2.0) * fm + T::lit(3.0)).sqrt() * pmm;
    for ll in (m + 2)..=l {
        let fl = T::from_u32(ll).unwrap();
        let a = ((T::lit(4.0) * fl * fl - T::one()) / (fl * fl - fm * fm)).sqrt();
        let flm1 = fl - T::one();
        let b = ((flm1 * flm1 - fm * fm) / (T::lit(4.0) * flm1 * flm1 - T::one())).sqrt();
        let next = a * (z * p_cur - b * p_prev);
        p_prev = p_cur;
        p_cur = next;
    }
    p_cur
}

pub(crate) fn unit_ball_volume<T: Real>(n: usize) -> T {
    // nu_n = pi^{n/2} / Gamma(n/2 + 1) via nu_n = 2 pi / n * nu_{n-2}
    let (mut v, start) = if n.is_multiple_of(2) {
        (T::one(), 2)
    } else {
        (T::lit(2.0), 3)
    };
    let mut k = start;
    while k <= n {
        v = v * T::TAU() / T::from_usize_lossy(k);
        k += 2;
    }
    v
}

#[inline]
fn wrap_delta<T: Real>(d: T, period: T) -> T {
    let d = d.abs();
    d.min(period - d)
}

/// Representative of `d` modulo `period` in `[-period/2, period/2]`.
fn signed_wrap<T: Real>(d: T, period: T) -> T {
    d - period * (d / period).round()
}

#[inline]
fn reduce<T: Real>(x: T, period: T) -> T {
    let mut y = x % period;
    if y < T::zero() {
        y += period;
    }
    if y >= period {
        y = T::zero();
    }
    y
}

fn check_positive<T: Real>(what: &str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be positive and finite, got {v}"
        )))
    }
}

impl<T: Real> fmt::Display for ManifoldModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ManifoldKind::Circle { radius } => write!(f, "circle:{radius}"),
            ManifoldKind::Sphere2 { radius } => write!(f, "sphere2:{radius}"),
            ManifoldKind::FlatTorus2 { side_a, side_b } => write!(f, "torus2:{side_a},{side_b}"),
        }
    }
}

impl<T: Real> FromStr for ManifoldModel<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::ManifoldSpec(s.to_string());
        let (name, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums: Vec<T> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map(T::lit).map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (name.trim().to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("circle", [r]) => Self::circle(*r),
            ("sphere2", [r]) => Self::sphere2(*r),
            ("torus2", [a, b]) => Self::flat_torus2(*a, *b),
            _ => Err(bad()),
        }
    }
}
