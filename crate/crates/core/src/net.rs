//! Epsilon-nets, their Voronoi partition and the shared quadrature set.
//!
//! Voronoi cells are never built geometrically. A cloud of fresh uniform samples
//! is assigned to the nearest net point (lowest index on ties) and every
//! integral over a cell becomes a weighted sum over its samples.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, ManifoldPoint};
use crate::rng::SeededRng;
use crate::scalar::{cmp_real, Real};
use crate::spatial::{for_each_within, NeighborGrid};

pub const DEFAULT_OVERSAMPLE: usize = 200;
const MIN_POOL: usize = 10_000;
const POOL_PER_BALL: f64 = 50.0;
/// Covering radius of the probe grid used to locate holes, as a fraction of eps.
const HOLE_GRID_FRACTION: f64 = 8.0;

/// Uniform samples with equal weights `vol(M) / Q` and their cell assignment.
#[derive(Clone, Debug)]
pub struct QuadratureSet<T> {
    pub samples: Vec<ManifoldPoint<T>>,
    pub weight: T,
    pub cell_of_sample: Vec<u32>,
    /// Distance from each sample to its assigned net point.
    pub distance_to_center: Vec<T>,
}

impl<T: Real> QuadratureSet<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct EpsNet<T> {
    pub points: Vec<ManifoldPoint<T>>,
    pub eps: T,
    /// Minimum pairwise distance between net points.
    pub separation: T,
    /// Largest distance from a quadrature sample to its net point.
    pub covering_radius: T,
    pub mu: Vec<T>,
    pub quadrature: QuadratureSet<T>,
    /// Net points added after the quadrature draw to cover samples the
    /// candidate pool missed.
    pub extensions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    pub max_gap: f64,
    pub cell_radius_violations: usize,
    pub probes: usize,
}

impl<T: Real> EpsNet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Voronoi partition of the given points, realized through `oversample * N`
    /// fresh quadrature samples. Fails with `NotDense` if some sample is
    /// farther than `eps` from every point.
    pub fn from_points(
        m: &ManifoldModel<T>,
        points: Vec<ManifoldPoint<T>>,
        eps: T,
        rng: &mut SeededRng,
        oversample: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter(
                "net needs at least one point".into(),
            ));
        }
        if oversample == 0 {
            return Err(Error::InvalidParameter(
                "oversample must be at least 1".into(),
            ));
        }
        let q = oversample * points.len();
        let samples = m.uniform_sample(rng, q)?;
        let (cells, dists) = assign_nearest(m, &points, &samples, eps);
        let covering = dists.iter().copied().fold(T::zero(), T::max);
        if covering > eps {
            return Err(Error::NotDense {
                eps: eps.as_f64(),
                covering: covering.as_f64(),
            });
        }
        finish(m, points, eps, samples, cells, dists, 0)
    }

    /// Reloads net points and measures from a dump. The result carries no
    /// quadrature, so only graph construction is meaningful on it.
    pub fn from_dump(m: &ManifoldModel<T>, dump: &NetDump) -> Result<Self> {
        if dump.points.len() != dump.mu.len() || dump.points.len() != dump.n {
            return Err(Error::InvalidParameter(format!(
                "net dump has {} points, {} measures, N = {}",
                dump.points.len(),
                dump.mu.len(),
                dump.n
            )));
        }
        let points = dump
            .points
            .iter()
            .map(|c| {
                let c: Vec<T> = c.iter().map(|&v| T::lit(v)).collect();
                m.point_from_slice(&c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points,
            eps: T::lit(dump.eps),
            separation: T::lit(dump.separation),
            covering_radius: T::lit(dump.covering_radius),
            mu: dump.mu.iter().map(|&v| T::lit(v)).collect(),
            quadrature: QuadratureSet {
                samples: Vec::new(),
                weight: T::zero(),
                cell_of_sample: Vec::new(),
                distance_to_center: Vec::new(),
            },
            extensions: 0,
        })
    }

    pub fn to_dump(&self, m: &ManifoldModel<T>, seed: Option<u64>) -> NetDump {
        let dim = m.ambient_dim();
        NetDump {
            manifold: m.to_string(),
            eps: self.eps.as_f64(),
            seed,
            n: self.points.len(),
            points: self
                .points
                .iter()
                .map(|p| p.coords[..dim].iter().map(|c| c.as_f64()).collect())
                .collect(),
            mu: self.mu.iter().map(|v| v.as_f64()).collect(),
            covering_radius: self.covering_radius.as_f64(),
            separation: self.separation.as_f64(),
        }
    }
}

/// Farthest-point-sampling net with Voronoi cell measures.
pub fn build_net<T: Real>(
    m: &ManifoldModel<T>,
    eps: T,
    rng: &mut SeededRng,
    oversample: usize,
) -> Result<EpsNet<T>> {
    let limit = m.injectivity_radius() / T::lit(2.0);
    if !(eps > T::zero() && eps < limit) {
        return Err(Error::EpsTooLarge {
            eps: eps.as_f64(),
            limit: limit.as_f64(),
        });
    }
    if oversample == 0 {
        return Err(Error::InvalidParameter(
            "oversample must be at least 1".into(),
        ));
    }
    let n = m.dimension();
    let c_n = m.unit_ball_volume() / T::lit(2.0);
    let pool_target = (T::lit(POOL_PER_BALL) * m.volume() / (c_n * eps.powi(n as i32)))
        .ceil()
        .to_usize()
        .unwrap_or(MIN_POOL);
    let pool = m.uniform_sample(rng, pool_target.max(MIN_POOL))?;
    let start = rng.index(pool.len());
    let mut points = farthest_point_sampling(m, &pool, start, eps);
    drop(pool);
    let filled = fill_holes(m, &mut points, eps);
    if filled > 0 {
        log::debug!("{filled} points added where the pool left the net more than eps away");
    }

    let q = oversample * points.len();
    let samples = m.uniform_sample(rng, q)?;
    let (mut cells, mut dists) = assign_nearest(m, &points, &samples, eps);
    let extensions = extend_to_cover(m, &mut points, &samples, &mut cells, &mut dists, eps);
    if extensions > 0 {
        log::debug!("net extended by {extensions} points to cover the quadrature set");
    }
    finish(m, points, eps, samples, cells, dists, extensions)
}

/// Continues the greedy selection on the manifold itself, not just the pool.
///
/// The distance to the net is maximized at Voronoi vertices, points
/// equidistant from `n + 1` net points. Each one farther than `eps` lies
/// within `s` of a grid point whose distance exceeds `eps - s`, and its sites
/// lie within that distance plus `2s` of the grid point. Every such vertex is
/// enumerated and the far ones are added, farthest first, until none remain.
/// Added points are farther than `eps` from the net, so separation is kept.
fn fill_holes<T: Real>(m: &ManifoldModel<T>, points: &mut Vec<ManifoldPoint<T>>, eps: T) -> usize {
    let s = eps / T::lit(HOLE_GRID_FRACTION);
    let probes = m.covering_grid(s);
    let k = m.dimension() + 1;
    let two = T::lit(2.0);
    let reach = eps + T::lit(3.0) * s;
    let mut added = 0;
    loop {
        let grid = NeighborGrid::new(m, points, reach);
        let net: &[ManifoldPoint<T>] = points;
        let distance_to_net = |x: &ManifoldPoint<T>| {
            let mut best = reach;
            for_each_within(m, &grid, net, x, reach, |_, d| best = best.min(d));
            best
        };
        let mut holes: Vec<(T, ManifoldPoint<T>)> = probes
            .par_iter()
            .flat_map_iter(|g| {
                let mut near = Vec::new();
                for_each_within(m, &grid, net, g, reach, |j, d| near.push((d, j)));
                let dg = near.iter().map(|p| p.0).fold(reach, T::min);
                let mut out = Vec::new();
                if dg <= eps - s {
                    return out;
                }
                near.retain(|p| p.0 <= dg + two * s * (T::one() + T::lit(1e-9)));
                if dg > eps + s || near.len() < k {
                    // Fewer than k sites nearby means no vertex is within s.
                    if dg > eps {
                        out.push((dg, *g));
                    }
                    return out;
                }
                near.sort_by_key(|p| p.1);
                let sites: Vec<ManifoldPoint<T>> = near.iter().map(|p| net[p.1]).collect();
                for_each_subset(sites.len(), k, |idx| {
                    let chosen: Vec<ManifoldPoint<T>> = idx.iter().map(|&i| sites[i]).collect();
                    for c in m.equidistant_points(&chosen, g) {
                        if m.distance(&c, g) <= two * s {
                            let d = distance_to_net(&c);
                            if d > eps {
                                out.push((d, c));
                            }
                        }
                    }
                });
                out
            })
            .collect();
        if holes.is_empty() {
            return added;
        }
        holes.sort_by(|a, b| cmp_real(b.0, a.0).then_with(|| cmp_coords(&a.1, &b.1)));
        let first_new = points.len();
        for (_, c) in holes {
            if points[first_new..].iter().all(|p| m.distance(p, &c) > eps) {
                points.push(c);
            }
        }
        added += points.len() - first_new;
    }
}

fn cmp_coords<T: Real>(a: &ManifoldPoint<T>, b: &ManifoldPoint<T>) -> Ordering {
    (0..3).fold(Ordering::Equal, |o, i| {
        o.then_with(|| cmp_real(a.coords[i], b.coords[i]))
    })
}

/// Calls `f` on every increasing `k`-subset of `0..n`.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Diagnostic covering check against fresh probes.
pub fn verify_net<T: Real>(
    net: &EpsNet<T>,
    m: &ManifoldModel<T>,
    rng: &mut SeededRng,
    probes: usize,
) -> Result<NetReport> {
    let pts = m.uniform_sample(rng, probes)?;
    let (_, dists) = assign_nearest(m, &net.points, &pts, net.eps);
    let max_gap = dists.iter().copied().fold(T::zero(), T::max);
    let violations = dists.iter().filter(|&&d| d > net.eps).count();
    Ok(NetReport {
        max_gap: max_gap.as_f64(),
        cell_radius_violations: violations,
        probes,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Farthest<T>(T, Reverse<usize>);

impl<T: Real> Eq for Farthest<T> {}

impl<T: Real> PartialOrd for Farthest<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Farthest<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_real(self.0, other.0).then(self.1.cmp(&other.1))
    }
}

/// Greedy farthest-point selection over `pool`, stopping once every pool
/// point lies within `eps` of the selection.
fn farthest_point_sampling<T: Real>(
    m: &ManifoldModel<T>,
    pool: &[ManifoldPoint<T>],
    start: usize,
    eps: T,
) -> Vec<ManifoldPoint<T>> {
    let grid = NeighborGrid::new(m, pool, eps);
    let mut nearest = vec![T::infinity(); pool.len()];
    let mut heap = BinaryHeap::with_capacity(pool.len());
    let mut net = Vec::new();
    let mut next = start;
    let mut reach = T::infinity();
    loop {
        let x = pool[next];
        net.push(x);
        if reach.is_infinite() {
            for (j, p) in pool.iter().enumerate() {
                nearest[j] = m.distance(&x, p);
                heap.push(Farthest(nearest[j], Reverse(j)));
            }
        } else {
            for_each_within(m, &grid, pool, &x, reach, |j, d| {
                if d < nearest[j] {
                    nearest[j] = d;
                    heap.push(Farthest(d, Reverse(j)));
                }
            });
        }
        // Drop stale heap entries.
        while let Some(&Farthest(d, Reverse(j))) = heap.peek() {
            if d == nearest[j] {
                break;
            }
            heap.pop();
        }
        match heap.peek() {
            Some(&Farthest(d, Reverse(j))) if d >= eps => {
                reach = d;
                next = j;
            }
            _ => break,
        }
    }
    net
}

/// Nearest net point per sample, lowest index on ties.
fn assign_nearest<T: Real>(
    m: &ManifoldModel<T>,
    points: &[ManifoldPoint<T>],
    samples: &[ManifoldPoint<T>],
    eps: T,
) -> (Vec<u32>, Vec<T>) {
    let grid = NeighborGrid::new(m, points, eps);
    let pairs: Vec<(u32, T)> = samples
        .par_iter()
        .map(|s| {
            let mut best = (usize::MAX, T::infinity());
            for_each_within(m, &grid, points, s, eps, |j, d| {
                if d < best.1 || (d == best.1 && j < best.0) {
                    best = (j, d);
                }
            });
            if best.0 == usize::MAX {
                for (j, p) in points.iter().enumerate() {
                    let d = m.distance(s, p);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
            }
            (best.0 as u32, best.1)
        })
        .collect();
    pairs.into_iter().unzip()
}

/// Continues the greedy selection over `samples` until each of them is
/// within `eps` of the net. Returns the number of points added.
fn extend_to_cover<T: Real>(
    m: &ManifoldModel<T>,
    points: &mut Vec<ManifoldPoint<T>>,
    samples: &[ManifoldPoint<T>],
    cells: &mut [u32],
    dists: &mut [T],
    eps: T,
) -> usize {
    let far: Vec<usize> = (0..samples.len()).filter(|&s| dists[s] >= eps).collect();
    if far.is_empty() {
        return 0;
    }
    let grid = NeighborGrid::new(m, samples, eps);
    let mut added = 0;
    while let Some(&pick) = far
        .iter()
        .filter(|&&s| dists[s] >= eps)
        .max_by(|&&a, &&b| cmp_real(dists[a], dists[b]).then(b.cmp(&a)))
    {
        let reach = dists[pick];
        let idx = points.len() as u32;
        let x = samples[pick];
        points.push(x);
        added += 1;
        for_each_within(m, &grid, samples, &x, reach, |s, d| {
            if d < dists[s] {
                dists[s] = d;
                cells[s] = idx;
            }
        });
        dists[pick] = T::zero();
        cells[pick] = idx;
    }
    added
}

fn finish<T: Real>(
    m: &ManifoldModel<T>,
    points: Vec<ManifoldPoint<T>>,
    eps: T,
    samples: Vec<ManifoldPoint<T>>,
    cells: Vec<u32>,
    dists: Vec<T>,
    extensions: usize,
) -> Result<EpsNet<T>> {
    let n = points.len();
    let q = samples.len();
    let mut counts = vec![0usize; n];
    for &c in &cells {
        counts[c as usize] += 1;
    }
    if let Some(cell) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCell { cell });
    }
    let vol = m.volume();
    let qf = T::from_usize_lossy(q);
    let mu = counts
        .iter()
        .map(|&c| vol * T::from_usize_lossy(c) / qf)
        .collect();
    let covering_radius = dists.iter().copied().fold(T::zero(), T::max);
    let separation = min_separation(m, &points);
    Ok(EpsNet {
        points,
        eps,
        separation,
        covering_radius,
        mu,
        quadrature: QuadratureSet {
            samples,
            weight: vol / qf,
            cell_of_sample: cells,
            distance_to_center: dists,
        },
        extensions,
    })
}

fn min_separation<T: Real>(m: &ManifoldModel<T>, points: &[ManifoldPoint<T>]) -> T {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|q| m.distance(&points[i], q))
                .fold(T::infinity(), T::min)
        })
        .reduce(T::infinity, T::min)
}

/// JSON dump of a net: manifold, parameters, points and cell measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetDump {
    pub manifold: String,
    pub eps: f64,
    pub seed: Option<u64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub covering_radius: f64,
    pub separation: f64,
}

impl NetDump {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// SHA-256 of the compact JSON encoding; keys eigenvector dumps.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("net dump serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn subsets_are_enumerated_once() {
        let mut seen = Vec::new();
        for_each_subset(5, 3, |idx| seen.push(idx.to_vec()));
        assert_eq!(seen.len(), 10);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
        assert!(seen.iter().all(|s| s[0] < s[1] && s[1] < s[2] && s[2] < 5));
        let mut count = 0;
        for_each_subset(2, 3, |_| count += 1);
        assert_eq!(count, 0);
    }

    #[test]
    fn holes_left_by_a_sparse_pool_are_filled() {
        // A pool far too small for eps leaves large holes for the fill step.
        let t = ManifoldModel::flat_torus2(2.0, 2.0).unwrap();
        let pool = t.uniform_sample(&mut SeededRng::new(5), 30).unwrap();
        let eps = 0.2;
        let mut points = farthest_point_sampling(&t, &pool, 0, eps);
        let before = points.len();
        let added = fill_holes(&t, &mut points, eps);
        assert_eq!(points.len(), before + added);
        assert!(added > 0);
        for i in 0..points.len() {
            for j in 0..i {
                assert!(t.distance(&points[i], &points[j]) >= eps - 1e-12);
            }
        }
        let probes = t.uniform_sample(&mut SeededRng::new(6), 20_000).unwrap();
        for p in &probes {
            let d = points
                .iter()
                .map(|x| t.distance(x, p))
                .fold(f64::INFINITY, f64::min);
            assert!(d <= eps, "{d}");
        }
    }

    #[test]
    fn eps_precondition() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let err = build_net(&s, PI, &mut SeededRng::new(1), 10).unwrap_err();
        assert!(matches!(err, Error::EpsTooLarge { .. }));
        assert!(matches!(
            build_net(&s, 0.0, &mut SeededRng::new(1), 10),
            Err(Error::EpsTooLarge { .. })
        ));
        assert!(build_net(&s, 0.3, &mut SeededRng::new(1), 0).is_err());
    }

    #[test]
    fn sphere_net_size_and_covering() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let net = build_net(&s, 0.3, &mut SeededRng::new(7), DEFAULT_OVERSAMPLE).unwrap();
        assert!(net.covering_radius <= 0.3);
        // Covering and packing bounds: 4 pi / (pi eps^2) <= N <= 4 pi / (pi (eps/2)^2).
        assert!((45..=178).contains(&net.len()), "N = {}", net.len());
        assert!(net.separation >= 0.3 - 1e-12);
        let report = verify_net(&net, &s, &mut SeededRng::new(99), 100_000).unwrap();
        assert!(report.max_gap <= report.max_gap.max(0.3));
        // The probe check is independent of the quadrature the net was built on.
        assert!(report.max_gap < 0.33, "max gap {}", report.max_gap);
    }

    #[test]
    fn small_torus_net_is_separated() {
        let t = ManifoldModel::flat_torus2(4.0, 4.0).unwrap();
        let net = build_net(&t, 0.6, &mut SeededRng::new(3), 50).unwrap();
        assert!(net.len() >= 2);
        assert!(net.separation >= 0.6 - 1e-12);
        assert!(net.covering_radius <= 0.6);
    }

    #[test]
    fn quadrature_invariants() {
        let t = ManifoldModel::flat_torus2(1.0, 1.0).unwrap();
        let net = build_net(&t, 0.1, &mut SeededRng::new(5), 100).unwrap();
        let q = &net.quadrature;
        assert_eq!(q.len(), 100 * (net.len() - net.extensions));
        let total: f64 = net.mu.iter().sum();
        assert!((total - t.volume()).abs() <= 1e-12 * net.len() as f64);
        assert!(net.mu.iter().all(|&m| m > 0.0));
        // Brute-force Voronoi assignment with lowest-index ties.
        for (s, p) in q.samples.iter().enumerate().step_by(37) {
            let mut best = (0, f64::INFINITY);
            for (j, x) in net.points.iter().enumerate() {
                let d = t.distance(p, x);
                if d < best.1 {
                    best = (j, d);
                }
            }
            assert_eq!(q.cell_of_sample[s] as usize, best.0);
            assert!(best.1 <= net.eps);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let a = build_net(&s, 0.35, &mut SeededRng::new(13), 20).unwrap();
        let b = build_net(&s, 0.35, &mut SeededRng::new(13), 20).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.quadrature.cell_of_sample, b.quadrature.cell_of_sample);
    }

    #[test]
    fn halving_eps_at_least_doubles_n() {
        for m in [
            ManifoldModel::sphere2(1.0).unwrap(),
            ManifoldModel::flat_torus2(2.0, 2.0).unwrap(),
        ] {
            let coarse = build_net(&m, 0.4, &mut SeededRng::new(1), 20).unwrap();
            let fine = build_net(&m, 0.2, &mut SeededRng::new(1), 20).unwrap();
            assert!(
                fine.len() >= 2 * coarse.len(),
                "{m}: {} vs {}",
                fine.len(),
                coarse.len()
            );
        }
    }

    #[test]
    fn one_point_net_on_the_circle() {
        let c = ManifoldModel::circle(1.0).unwrap();
        let p = c.point_from_slice(&[1.0, 0.0]).unwrap();
        let net = EpsNet::from_points(&c, vec![p], PI, &mut SeededRng::new(2), 10).unwrap();
        let report = verify_net(&net, &c, &mut SeededRng::new(3), 1).unwrap();
        assert!(report.max_gap <= PI + 1e-12);
        assert_eq!(report.cell_radius_violations, 0);
    }

    #[test]
    fn sparse_point_sets_are_rejected() {
        let c = ManifoldModel::circle(1.0).unwrap();
        let p = c.point_from_slice(&[1.0, 0.0]).unwrap();
        let err = EpsNet::from_points(&c, vec![p], 0.5, &mut SeededRng::new(2), 10).unwrap_err();
        assert!(matches!(err, Error::NotDense { .. }));
    }

    #[test]
    fn empty_cells_are_an_error() {
        let c = ManifoldModel::circle(1.0).unwrap();
        // Two coincident points: the second never wins a tie.
        let p = c.point_from_slice(&[1.0, 0.0]).unwrap();
        let err = EpsNet::from_points(&c, vec![p, p], PI, &mut SeededRng::new(2), 10).unwrap_err();
        assert!(matches!(err, Error::EmptyCell { cell: 1 }));
    }

    #[test]
    fn dump_round_trip() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let net = build_net(&s, 0.5, &mut SeededRng::new(4), 20).unwrap();
        let dump = net.to_dump(&s, Some(4));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        dump.save(&path).unwrap();
        let back = NetDump::load(&path).unwrap();
        assert_eq!(back, dump);
        assert_eq!(back.hash(), dump.hash());
        let reloaded = EpsNet::from_dump(&s, &back).unwrap();
        assert_eq!(reloaded.mu, net.mu);
        for (a, b) in reloaded.points.iter().zip(&net.points) {
            assert!(s.chord_sq(a, b) < 1e-24);
        }
    }
}
