//! Smallest eigenpairs of the graph Laplacian.
//!
//! The operator `L = D_mu^{-1} W` is self-adjoint in the `mu`-weighted inner
//! product. Both solvers work on the symmetric similarity transform
//! `B = D_mu^{-1/2} W D_mu^{-1/2}` and map eigenvectors back through
//! `v = D_mu^{-1/2} y`, so `mu`-orthonormality of the `v` is Euclidean
//! orthonormality of the `y`.

mod dense;
mod lanczos;

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

pub use lanczos::LanczosOptions;

pub(crate) use dense::{orthogonal_polar, symmetric_eigen};

use crate::error::{Error, Result};
use crate::graph::{GraphFunction, WeightedGraph};
use crate::rng::SeededRng;
use crate::scalar::{cmp_real, dot, Real};

/// Largest `N` routed to the dense solver under [`SolverMethod::Auto`].
pub const DENSE_MAX: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub method: SolverMethod,
    pub lanczos: LanczosOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            lanczos: LanczosOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        let mut o = Self::default();
        o.lanczos.tol = tol;
        o
    }
}

/// `y -> D^{-1/2} W D^{-1/2} y`.
pub(crate) struct SymmetricOperator<'a, T> {
    graph: &'a WeightedGraph<T>,
    inv_sqrt_mu: Vec<T>,
}

impl<'a, T: Real> SymmetricOperator<'a, T> {
    fn new(graph: &'a WeightedGraph<T>) -> Self {
        let inv_sqrt_mu = graph.mu().iter().map(|&m| T::one() / m.sqrt()).collect();
        Self { graph, inv_sqrt_mu }
    }

    pub(crate) fn len(&self) -> usize {
        self.inv_sqrt_mu.len()
    }

    pub(crate) fn apply(&self, y: &[T], out: &mut [T]) {
        let x: Vec<T> = y
            .iter()
            .zip(&self.inv_sqrt_mu)
            .map(|(&a, &s)| a * s)
            .collect();
        self.graph.weight_laplacian_into(&x, out);
        for (o, &s) in out.iter_mut().zip(&self.inv_sqrt_mu) {
            *o *= s;
        }
    }

    fn dense(&self) -> Vec<T> {
        let n = self.len();
        let mut b = vec![T::zero(); n * n];
        for i in 0..n {
            let (cols, ws) = self.graph.neighbors(i);
            b[i * n + i] =
                self.graph.degree_weight()[i] * self.inv_sqrt_mu[i] * self.inv_sqrt_mu[i];
            for (&j, &w) in cols.iter().zip(ws) {
                let j = j as usize;
                b[i * n + j] = -w * self.inv_sqrt_mu[i] * self.inv_sqrt_mu[j];
            }
        }
        b
    }
}

/// The `k` smallest eigenpairs, ascending, with `mu`-orthonormal vectors.
#[derive(Clone, Debug)]
pub struct SpectrumResult<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Vec<GraphFunction<T>>,
    /// `||L v - lambda v||_mu` per pair.
    pub residuals: Vec<T>,
    /// `max_{a,b} |<v_a, v_b>_mu - delta_ab|`.
    pub mu_gram_error: T,
    pub method: SolverMethod,
    /// Whether the whole spectrum was computed (`k == N`).
    pub complete: bool,
}

impl<T: Real> SpectrumResult<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> T {
        self.residuals.iter().copied().fold(T::zero(), T::max)
    }

    /// Writes `index,eigenvalue,residual` (1-based index).
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "index,eigenvalue,residual")?;
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            writeln!(out, "{},{:e},{:e}", i + 1, l.as_f64(), r.as_f64())?;
        }
        Ok(())
    }

    pub fn to_dump(&self, net_hash: &str, rho: f64) -> EigenvectorDump {
        EigenvectorDump {
            net_hash: net_hash.to_string(),
            rho,
            eigenvalues: self.eigenvalues.iter().map(|x| x.as_f64()).collect(),
            residuals: self.residuals.iter().map(|x| x.as_f64()).collect(),
            eigenvectors: self
                .eigenvectors
                .iter()
                .map(|v| v.iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
    }
}

/// Eigenvectors keyed by the hash of the net they were computed on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenvectorDump {
    pub net_hash: String,
    pub rho: f64,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenvectorDump {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// The `k` smallest eigenpairs of the graph Laplacian with residual tolerance `tol`.
pub fn smallest_k<T: Real>(
    graph: &WeightedGraph<T>,
    k: usize,
    tol: f64,
) -> Result<SpectrumResult<T>> {
    smallest_k_with(graph, k, &SolverOptions::with_tol(tol))
}

pub fn smallest_k_with<T: Real>(
    graph: &WeightedGraph<T>,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectrumResult<T>> {
    let n = graph.len();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let method = match opts.method {
        SolverMethod::Auto if n <= DENSE_MAX => SolverMethod::Dense,
        SolverMethod::Auto => SolverMethod::Lanczos,
        m => m,
    };
    let op = SymmetricOperator::new(graph);
    let (values, ys) = match method {
        SolverMethod::Dense => dense_smallest(&op, k, opts.lanczos.seed),
        _ => lanczos_smallest(&op, k, &opts.lanczos)?,
    };
    let eigenvectors: Vec<GraphFunction<T>> = ys
        .into_iter()
        .map(|y| {
            GraphFunction(
                y.iter()
                    .zip(&op.inv_sqrt_mu)
                    .map(|(&a, &s)| a * s)
                    .collect(),
            )
        })
        .collect();
    let mut residuals = Vec::with_capacity(k);
    let mut lv = vec![T::zero(); n];
    for (lam, v) in values.iter().zip(&eigenvectors) {
        graph.laplacian_into(v, &mut lv);
        let r: Vec<T> = lv
            .iter()
            .zip(v.iter())
            .map(|(&a, &b)| a - *lam * b)
            .collect();
        residuals.push(graph.inner(&r, &r).sqrt());
    }
    let mut gram_err = T::zero();
    for a in 0..k {
        for b in a..k {
            let g = graph.inner(&eigenvectors[a], &eigenvectors[b]);
            let target = if a == b { T::one() } else { T::zero() };
            gram_err = gram_err.max((g - target).abs());
        }
    }
    let result = SpectrumResult {
        eigenvalues: values,
        eigenvectors,
        residuals,
        mu_gram_error: gram_err,
        method,
        complete: k == n,
    };
    let scale = T::one().max(result.eigenvalues[k - 1].abs());
    if result.max_residual() > T::lit(opts.lanczos.tol) * scale {
        warn!(
            "eigen residual {:e} above tolerance {:e}",
            result.max_residual().as_f64(),
            opts.lanczos.tol
        );
    }
    Ok(result)
}

fn dense_smallest<T: Real>(
    op: &SymmetricOperator<'_, T>,
    k: usize,
    seed: u64,
) -> (Vec<T>, Vec<Vec<T>>) {
    let n = op.len();
    let mut b = op.dense();
    let tri = dense::tridiagonalize(&mut b, n);
    drop(b);
    let all = dense::tridiagonal_eigenvalues(&tri.d, &tri.e);
    let values = all[..k].to_vec();
    let mut rng = SeededRng::with_stream(seed, 1);
    let mut zs = dense::tridiagonal_inverse_iteration(&tri.d, &tri.e, &values, &mut rng);
    for z in zs.iter_mut() {
        tri.back_transform(z);
    }
    debug!(
        "dense solve: N = {n}, k = {k}, |T|_1 = {:e}",
        tri.one_norm().as_f64()
    );
    (values, zs)
}

fn lanczos_smallest<T: Real>(
    op: &SymmetricOperator<'_, T>,
    k: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = op.len();
    let mut rng = SeededRng::with_stream(opts.seed, 2);
    let first = lanczos::thick_restart(op, &[], k, opts, &mut rng)?;
    debug!(
        "lanczos: {} restarts for k = {k}, worst Ritz residual {:e}",
        first.restarts,
        first
            .residuals
            .iter()
            .copied()
            .fold(T::zero(), T::max)
            .as_f64()
    );
    let mut values = first.values;
    let mut vectors = first.vectors;
    // Confirmation: look for anything below lambda_k that the Krylov space
    // missed, e.g. a second copy of an exactly repeated eigenvalue.
    let mut confirm_opts = opts.clone();
    confirm_opts.max_dim = Some(opts.max_dim.unwrap_or(80).min(80));
    for _ in 0..k {
        if vectors.len() >= n {
            break;
        }
        let extra = lanczos::thick_restart(op, &vectors, 1, &confirm_opts, &mut rng)?;
        let lam = extra.values[0];
        let last = values[k - 1];
        let slack = T::lit(opts.tol) * T::one().max(last.abs());
        if lam < last - slack {
            debug!(
                "lanczos confirmation found {:e} below {:e}",
                lam.as_f64(),
                last.as_f64()
            );
            let pos = values.partition_point(|&x| cmp_real(x, lam).is_le());
            values.insert(pos, lam);
            vectors.insert(pos, extra.vectors.into_iter().next().unwrap());
            values.truncate(k);
            vectors.truncate(k);
        } else {
            break;
        }
    }
    // Final Rayleigh-Ritz over the collected block so near-degenerate pairs
    // are jointly orthonormal.
    let mut bv = Vec::with_capacity(k);
    for v in &vectors {
        let mut out = vec![T::zero(); n];
        op.apply(v, &mut out);
        bv.push(out);
    }
    let mut h = vec![T::zero(); k * k];
    let mut g = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..k {
            h[i * k + j] = dot(&vectors[i], &bv[j]);
            g[i * k + j] = dot(&vectors[i], &vectors[j]);
        }
    }
    let orth_err = (0..k * k)
        .map(|idx| {
            (g[idx]
                - if idx / k == idx % k {
                    T::one()
                } else {
                    T::zero()
                })
            .abs()
        })
        .fold(T::zero(), T::max);
    if orth_err < T::lit(1e-8) {
        for i in 0..k {
            for j in i + 1..k {
                let s = (h[i * k + j] + h[j * k + i]) * T::lit(0.5);
                h[i * k + j] = s;
                h[j * k + i] = s;
            }
        }
        let (theta, s) = symmetric_eigen(&h, k);
        let rotated: Vec<Vec<T>> = s
            .iter()
            .map(|coef| {
                let mut y = vec![T::zero(); n];
                for (v, &c) in vectors.iter().zip(coef) {
                    crate::scalar::axpy(c, v, &mut y);
                }
                y
            })
            .collect();
        return Ok((theta, rotated));
    }
    Ok((values, vectors))
}

/// `sum_{a : lo < lambda_a <= hi} <f, v_a>_mu v_a`.
pub fn spectral_projection<T: Real>(
    graph: &WeightedGraph<T>,
    spectrum: &SpectrumResult<T>,
    f: &GraphFunction<T>,
    lo: T,
    hi: T,
) -> Result<GraphFunction<T>> {
    if f.len() != graph.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            got: f.len(),
        });
    }
    let resolved = *spectrum
        .eigenvalues
        .last()
        .ok_or(Error::KTooLarge { k: 0, n: 0 })?;
    if hi > resolved && !spectrum.complete {
        return Err(Error::IntervalNotResolved {
            hi: hi.as_f64(),
            resolved: resolved.as_f64(),
        });
    }
    let mut out = vec![T::zero(); f.len()];
    for (lam, v) in spectrum.eigenvalues.iter().zip(&spectrum.eigenvectors) {
        if *lam > lo && *lam <= hi {
            let c = graph.inner(f, v);
            crate::scalar::axpy(c, v, &mut out);
        }
    }
    Ok(GraphFunction(out))
}

/// Splits ascending eigenvalues into clusters: a new cluster starts where
/// `lambda_{a+1} - lambda_a > rel_gap * max(1, lambda_a)`.
pub fn cluster_eigenvalues<T: Real>(values: &[T], rel_gap: T) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    if values.is_empty() {
        return out;
    }
    let mut start = 0;
    for a in 0..values.len() - 1 {
        if values[a + 1] - values[a] > rel_gap * T::one().max(values[a]) {
            out.push(start..a + 1);
            start = a + 1;
        }
    }
    out.push(start..values.len());
    out
}
