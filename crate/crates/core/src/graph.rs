//! Weighted proximity graph on a net and its graph Laplacian.
//!
//! Vertices `i ~ j` are joined when `0 < d(x_i, x_j) < rho`, with weight
//! `w_ij = 2(n+2) / (nu_n rho^(n+2)) * mu_i * mu_j`. The Laplacian
//!
//! ```text
//! (L u)_i = (1 / mu_i) * sum_{j ~ i} w_ij (u_i - u_j)
//! ```
//!
//! is nonnegative and self-adjoint for `<u, v> = sum_i mu_i u_i v_i`, and its
//! quadratic form is the discrete Dirichlet energy.

use std::io::Write;
use std::ops::{Deref, DerefMut};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, ManifoldPoint};
use crate::net::EpsNet;
use crate::scalar::Real;
use crate::spatial::{for_each_within, NeighborGrid};

const GRID_THRESHOLD: usize = 5000;

/// A function on the vertices of a graph.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GraphFunction<T>(pub Vec<T>);

impl<T: Real> GraphFunction<T> {
    pub fn constant(n: usize, c: T) -> Self {
        Self(vec![c; n])
    }

    pub fn indicator(n: usize, i: usize) -> Self {
        let mut v = vec![T::zero(); n];
        v[i] = T::one();
        Self(v)
    }

    pub fn scaled(&self, c: T) -> Self {
        Self(self.0.iter().map(|&v| v * c).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl<T> Deref for GraphFunction<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for GraphFunction<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> From<Vec<T>> for GraphFunction<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// Symmetric weighted graph in compressed-row form.
#[derive(Clone, Debug)]
pub struct WeightedGraph<T> {
    rho: T,
    mu: Vec<T>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<T>,
    degree: Vec<T>,
    components: usize,
    /// `(n+2) / (nu_n rho^(n+2))` when weights follow the proximity formula.
    energy_scale: Option<T>,
}

impl<T: Real> WeightedGraph<T> {
    /// Proximity graph on `points` with the given vertex measures.
    pub fn from_points(
        m: &ManifoldModel<T>,
        points: &[ManifoldPoint<T>],
        mu: Vec<T>,
        rho: T,
    ) -> Result<Self> {
        if points.len() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: mu.len(),
            });
        }
        if let Some(i) = mu.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("mu[{i}] is not positive")));
        }
        let n = points.len();
        let neighbors: Vec<Vec<u32>> = if n > GRID_THRESHOLD {
            let grid = NeighborGrid::new(m, points, rho);
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut row = Vec::new();
                    for_each_within(m, &grid, points, &points[i], rho, |j, d| {
                        if j != i && d > T::zero() {
                            row.push(j as u32);
                        }
                    });
                    row.sort_unstable();
                    row
                })
                .collect()
        } else {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    (0..n)
                        .filter(|&j| {
                            let d = m.distance(&points[i], &points[j]);
                            j != i && d > T::zero() && d < rho
                        })
                        .map(|j| j as u32)
                        .collect()
                })
                .collect()
        };
        Ok(Self::from_neighbors(m.dimension(), rho, mu, neighbors))
    }

    /// Proximity-formula weights on an explicit edge set.
    pub fn from_edges(dim: usize, rho: T, mu: Vec<T>, edges: &[(usize, usize)]) -> Self {
        let n = mu.len();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            assert!(i != j && i < n && j < n, "invalid edge ({i}, {j})");
            neighbors[i].push(j as u32);
            neighbors[j].push(i as u32);
        }
        for row in &mut neighbors {
            row.sort_unstable();
            row.dedup();
        }
        Self::from_neighbors(dim, rho, mu, neighbors)
    }

    fn from_neighbors(dim: usize, rho: T, mu: Vec<T>, neighbors: Vec<Vec<u32>>) -> Self {
        let nu = crate::manifold::unit_ball_volume::<T>(dim);
        let scale = T::from_usize_lossy(dim + 2) / (nu * rho.powi(dim as i32 + 2));
        let two_scale = T::lit(2.0) * scale;
        let mut row_ptr = Vec::with_capacity(mu.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        for (i, row) in neighbors.iter().enumerate() {
            for &j in row {
                cols.push(j);
                weights.push(pair_weight(two_scale, &mu, i, j as usize));
            }
            row_ptr.push(cols.len());
        }
        Self::assemble(rho, mu, row_ptr, cols, weights, Some(scale))
    }

    /// Graph with explicitly given symmetric weights `(i, j, w_ij)`.
    pub fn with_weights(mu: Vec<T>, edges: &[(usize, usize, T)]) -> Self {
        let n = mu.len();
        let mut rows: Vec<Vec<(u32, T)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            assert!(i != j && i < n && j < n, "invalid edge ({i}, {j})");
            assert!(w > T::zero(), "edge weights must be positive");
            rows[i].push((j as u32, w));
            rows[j].push((i as u32, w));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, w) in row {
                cols.push(j);
                weights.push(w);
            }
            row_ptr.push(cols.len());
        }
        Self::assemble(T::nan(), mu, row_ptr, cols, weights, None)
    }

    fn assemble(
        rho: T,
        mu: Vec<T>,
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        weights: Vec<T>,
        energy_scale: Option<T>,
    ) -> Self {
        let n = mu.len();
        let degree = (0..n)
            .map(|i| weights[row_ptr[i]..row_ptr[i + 1]].iter().copied().sum())
            .collect();
        let mut g = Self {
            rho,
            mu,
            row_ptr,
            cols,
            weights,
            degree,
            components: 0,
            energy_scale,
        };
        g.components = g.count_components();
        if g.components > 1 {
            log::warn!(
                "graph on {} vertices has {} connected components",
                n,
                g.components
            );
        }
        g
    }

    fn count_components(&self) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for &j in self.neighbors(i).0 {
                    if !seen[j as usize] {
                        seen[j as usize] = true;
                        stack.push(j as usize);
                    }
                }
            }
        }
        count
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn degree_weight(&self) -> &[T] {
        &self.degree
    }

    pub fn edge_count(&self) -> usize {
        self.cols.len() / 2
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    /// Neighbor indices and weights of vertex `i`, sorted by index.
    pub fn neighbors(&self, i: usize) -> (&[u32], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.weights[r])
    }

    /// Edges `(i, j, w_ij)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.len() {
            let (cols, ws) = self.neighbors(i);
            for (&j, &w) in cols.iter().zip(ws) {
                if (j as usize) > i {
                    out.push((i, j as usize, w));
                }
            }
        }
        out
    }

    /// Same edges with every measure multiplied by `c`.
    pub fn with_scaled_measure(&self, c: T) -> Self {
        let mu: Vec<T> = self.mu.iter().map(|&v| v * c).collect();
        match self.energy_scale {
            Some(scale) => {
                let two_scale = T::lit(2.0) * scale;
                let mut weights = Vec::with_capacity(self.weights.len());
                for i in 0..self.len() {
                    for &j in self.neighbors(i).0 {
                        weights.push(pair_weight(two_scale, &mu, i, j as usize));
                    }
                }
                Self::assemble(
                    self.rho,
                    mu,
                    self.row_ptr.clone(),
                    self.cols.clone(),
                    weights,
                    Some(scale),
                )
            }
            None => {
                let weights = self.weights.iter().map(|&w| w * c * c).collect();
                Self::assemble(
                    self.rho,
                    mu,
                    self.row_ptr.clone(),
                    self.cols.clone(),
                    weights,
                    None,
                )
            }
        }
    }

    fn check_len(&self, u: &[T]) -> Result<()> {
        if u.len() == self.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.len(),
                got: u.len(),
            })
        }
    }

    /// `(L u)_i = (1/mu_i) sum_j w_ij (u_i - u_j)`.
    pub fn apply_laplacian(&self, u: &GraphFunction<T>) -> Result<GraphFunction<T>> {
        self.check_len(u)?;
        let mut out = vec![T::zero(); self.len()];
        self.laplacian_into(u, &mut out);
        Ok(GraphFunction(out))
    }

    pub(crate) fn laplacian_into(&self, u: &[T], out: &mut [T]) {
        out.par_iter_mut()
            .enumerate()
            .with_min_len(256)
            .for_each(|(i, o)| {
                let (cols, ws) = self.neighbors(i);
                let ui = u[i];
                let mut acc = T::zero();
                for (&j, &w) in cols.iter().zip(ws) {
                    acc += w * (ui - u[j as usize]);
                }
                *o = acc / self.mu[i];
            });
    }

    /// Weight-Laplacian action `(W u)_i = sum_j w_ij (u_i - u_j)` (no `1/mu_i`).
    pub(crate) fn weight_laplacian_into(&self, u: &[T], out: &mut [T]) {
        out.par_iter_mut()
            .enumerate()
            .with_min_len(256)
            .for_each(|(i, o)| {
                let (cols, ws) = self.neighbors(i);
                let ui = u[i];
                let mut acc = T::zero();
                for (&j, &w) in cols.iter().zip(ws) {
                    acc += w * (ui - u[j as usize]);
                }
                *o = acc;
            });
    }

    /// Discrete Dirichlet energy; each unordered edge is counted twice.
    pub fn dirichlet_energy(&self, u: &GraphFunction<T>) -> Result<T> {
        self.check_len(u)?;
        let half = T::lit(0.5);
        let total = (0..self.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|i| {
                let (cols, ws) = self.neighbors(i);
                let mut acc = T::zero();
                for (&j, &w) in cols.iter().zip(ws) {
                    let d = u[j as usize] - u[i];
                    acc += match self.energy_scale {
                        Some(_) => self.mu[i] * self.mu[j as usize] * d * d,
                        None => half * w * d * d,
                    };
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum::<T>();
        Ok(match self.energy_scale {
            Some(scale) => scale * total,
            None => total,
        })
    }

    /// `sum_i mu_i u_i v_i`.
    pub fn graph_inner(&self, u: &GraphFunction<T>, v: &GraphFunction<T>) -> Result<T> {
        self.check_len(u)?;
        self.check_len(v)?;
        Ok(self.inner(u, v))
    }

    pub(crate) fn inner(&self, u: &[T], v: &[T]) -> T {
        self.mu
            .iter()
            .zip(u.iter().zip(v))
            .fold(T::zero(), |acc, (&m, (&a, &b))| acc + m * a * b)
    }

    pub fn graph_norm(&self, u: &GraphFunction<T>) -> Result<T> {
        Ok(self.graph_inner(u, u)?.sqrt())
    }

    /// Dense `N x N` matrix of the Laplacian operator (rows scaled by `1/mu_i`).
    pub fn dense_operator(&self) -> Vec<Vec<T>> {
        let n = self.len();
        let mut a = vec![vec![T::zero(); n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            let (cols, ws) = self.neighbors(i);
            row[i] = self.degree[i] / self.mu[i];
            for (&j, &w) in cols.iter().zip(ws) {
                row[j as usize] = -w / self.mu[i];
            }
        }
        a
    }

    pub fn to_dump(&self) -> GraphDump {
        GraphDump {
            n: self.len(),
            rho: self.rho.as_f64(),
            mu: self.mu.iter().map(|v| v.as_f64()).collect(),
            edges: self
                .edges()
                .into_iter()
                .map(|(i, j, w)| (i, j, w.as_f64()))
                .collect(),
        }
    }

    /// Symmetric weight Laplacian (`d_i` on the diagonal, `-w_ij` off it) as
    /// 1-based `i j value` lines. Pair it with `mu` for the mass matrix.
    pub fn write_coordinate(&self, mut out: impl Write) -> std::io::Result<()> {
        for i in 0..self.len() {
            let (cols, ws) = self.neighbors(i);
            let mut diag_written = false;
            for (&j, &w) in cols.iter().zip(ws) {
                if !diag_written && (j as usize) > i {
                    writeln!(out, "{} {} {}", i + 1, i + 1, self.degree[i])?;
                    diag_written = true;
                }
                writeln!(out, "{} {} {}", i + 1, j + 1, -w)?;
            }
            if !diag_written {
                writeln!(out, "{} {} {}", i + 1, i + 1, self.degree[i])?;
            }
        }
        Ok(())
    }
}

/// Proximity graph of an epsilon-net.
/// `c * mu_i * mu_j` with the product taken in index order so that
/// `w_ij` and `w_ji` are bitwise equal.
fn pair_weight<T: Real>(c: T, mu: &[T], i: usize, j: usize) -> T {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    c * mu[a] * mu[b]
}

pub fn build_graph<T: Real>(
    net: &EpsNet<T>,
    m: &ManifoldModel<T>,
    rho: T,
) -> Result<WeightedGraph<T>> {
    let limit = m.injectivity_radius() / T::lit(2.0);
    if !(rho > net.eps && rho < limit) {
        return Err(Error::RhoOutOfRange {
            rho: rho.as_f64(),
            eps: net.eps.as_f64(),
            limit: limit.as_f64(),
        });
    }
    WeightedGraph::from_points(m, &net.points, net.mu.clone(), rho)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    #[serde(rename = "N")]
    pub n: usize,
    pub rho: f64,
    pub mu: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphDump {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
