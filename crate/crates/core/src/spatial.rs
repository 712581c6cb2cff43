//! Uniform bucket grid over embedding coordinates for radius queries.

use std::collections::HashMap;

use crate::manifold::{ManifoldModel, ManifoldPoint};
use crate::scalar::Real;

type CellKey = [i64; 3];

/// Buckets points by embedding cell so that every point within geodesic
/// distance `r` of a query is visited. Candidates still have to be checked
/// against the exact distance.
pub(crate) struct NeighborGrid<T> {
    widths: [T; 3],
    counts: [Option<i64>; 3],
    buckets: HashMap<CellKey, Vec<u32>>,
}

impl<T: Real> NeighborGrid<T> {
    pub(crate) fn new(m: &ManifoldModel<T>, points: &[ManifoldPoint<T>], cell: T) -> Self {
        let periods = m.periods();
        let mut widths = [cell; 3];
        let mut counts = [None; 3];
        for axis in 0..3 {
            if let Some(p) = periods[axis] {
                let n = (p / cell).floor().to_i64().unwrap_or(1).max(1);
                counts[axis] = Some(n);
                widths[axis] = p / T::from_i64(n).unwrap();
            }
        }
        let mut grid = Self {
            widths,
            counts,
            buckets: HashMap::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let key = grid.key(p);
            grid.buckets.entry(key).or_default().push(i as u32);
        }
        grid
    }

    fn axis_index(&self, axis: usize, c: T) -> i64 {
        let i = (c / self.widths[axis]).floor().to_i64().unwrap_or(0);
        match self.counts[axis] {
            Some(n) => i.rem_euclid(n),
            None => i,
        }
    }

    fn key(&self, p: &ManifoldPoint<T>) -> CellKey {
        [
            self.axis_index(0, p.coords[0]),
            self.axis_index(1, p.coords[1]),
            self.axis_index(2, p.coords[2]),
        ]
    }

    fn axis_range(&self, axis: usize, c: T, reach: T) -> Vec<i64> {
        match self.counts[axis] {
            Some(n) => {
                let center = self.axis_index(axis, c);
                let k = (reach / self.widths[axis]).ceil().to_i64().unwrap_or(n) + 1;
                if 2 * k + 1 >= n {
                    (0..n).collect()
                } else {
                    (center - k..=center + k).map(|i| i.rem_euclid(n)).collect()
                }
            }
            None => {
                let lo = self.axis_index(axis, c - reach);
                let hi = self.axis_index(axis, c + reach);
                (lo..=hi).collect()
            }
        }
    }

    /// Calls `visit` with every stored index whose embedding cell may hold a
    /// point within Euclidean (chord) distance `reach` of `p`.
    pub(crate) fn for_each_candidate(
        &self,
        p: &ManifoldPoint<T>,
        reach: T,
        mut visit: impl FnMut(usize),
    ) {
        let r0 = self.axis_range(0, p.coords[0], reach);
        let r1 = self.axis_range(1, p.coords[1], reach);
        let r2 = self.axis_range(2, p.coords[2], reach);
        for &i in &r0 {
            for &j in &r1 {
                for &k in &r2 {
                    if let Some(bucket) = self.buckets.get(&[i, j, k]) {
                        for &idx in bucket {
                            visit(idx as usize);
                        }
                    }
                }
            }
        }
    }
}

/// Geodesic radius search: `visit(index, distance)` for every point with
/// `distance < r`.
pub(crate) fn for_each_within<T: Real>(
    m: &ManifoldModel<T>,
    grid: &NeighborGrid<T>,
    points: &[ManifoldPoint<T>],
    x: &ManifoldPoint<T>,
    r: T,
    mut visit: impl FnMut(usize, T),
) {
    let chord = m.chord_of(r);
    // Small relative pad so rounding in the chord filter never drops a point.
    let pad = chord * (T::one() + T::lit(1e-9));
    let pad_sq = pad * pad;
    grid.for_each_candidate(x, pad, |j| {
        let y = &points[j];
        if m.chord_sq(x, y) <= pad_sq {
            let d = m.distance(x, y);
            if d < r {
                visit(j, d);
            }
        }
    });
}
