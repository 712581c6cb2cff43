//! Thick-restart Lanczos with full reorthogonalization for the smallest
//! eigenpairs of a symmetric operator.

use log::debug;
use rayon::prelude::*;

use super::dense::symmetric_eigen;
use super::SymmetricOperator;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::{axpy, dot, Real};

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Maximum basis size before a restart; `None` picks `min(N, 4k + 80)`.
    pub max_dim: Option<usize>,
    /// Residual tolerance relative to `max(1, |lambda_k|)`.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_dim: None,
            tol: 1e-9,
            max_restarts: 500,
            seed: 0x5eed,
        }
    }
}

/// Ritz pairs found in the orthogonal complement of `locked`.
pub(crate) struct RitzPairs<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<T>,
    pub restarts: usize,
}

fn orthogonalize<T: Real>(x: &mut [T], locked: &[Vec<T>], basis: &[Vec<T>]) {
    for _ in 0..2 {
        let coeffs: Vec<T> = locked
            .par_iter()
            .chain(basis.par_iter())
            .map(|b| dot(b, x))
            .collect();
        for (c, b) in coeffs.iter().zip(locked.iter().chain(basis.iter())) {
            axpy(-*c, b, x);
        }
    }
}

fn norm<T: Real>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

/// Returns a unit vector orthogonal to `locked` and `basis`, or `None` when
/// the complement is numerically exhausted.
fn fresh_direction<T: Real>(
    n: usize,
    locked: &[Vec<T>],
    basis: &[Vec<T>],
    rng: &mut SeededRng,
) -> Option<Vec<T>> {
    for _ in 0..3 {
        let mut x: Vec<T> = (0..n).map(|_| rng.normal::<T>()).collect();
        let before = norm(&x);
        orthogonalize(&mut x, locked, basis);
        let after = norm(&x);
        if after > before * T::lit(1e-8) {
            for v in x.iter_mut() {
                *v /= after;
            }
            return Some(x);
        }
    }
    None
}

fn combine<T: Real>(basis: &[Vec<T>], coeffs: &[T]) -> Vec<T> {
    let n = basis[0].len();
    let mut out = vec![T::zero(); n];
    out.par_chunks_mut(1024)
        .enumerate()
        .for_each(|(chunk, dst)| {
            let start = chunk * 1024;
            let len = dst.len();
            for (b, &c) in basis.iter().zip(coeffs) {
                for (o, &x) in dst.iter_mut().zip(&b[start..start + len]) {
                    *o += c * x;
                }
            }
        });
    out
}

/// Computes the `nev` smallest eigenpairs of `op` restricted to the
/// complement of the orthonormal set `locked`.
pub(crate) fn thick_restart<T: Real>(
    op: &SymmetricOperator<'_, T>,
    locked: &[Vec<T>],
    nev: usize,
    opts: &LanczosOptions,
    rng: &mut SeededRng,
) -> Result<RitzPairs<T>> {
    let n = op.len();
    let avail = n - locked.len();
    if nev == 0 || nev > avail {
        return Err(Error::KTooLarge { k: nev, n: avail });
    }
    let m = opts
        .max_dim
        .unwrap_or(4 * nev + 80)
        .clamp(nev + 1, avail.max(nev + 1))
        .min(avail);
    let tol = T::lit(opts.tol);
    let keep = if m > nev {
        (nev + (m - nev) / 2).min(m - 1)
    } else {
        nev
    };

    let mut v: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    let mut w: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    v.push(fresh_direction(n, locked, &[], rng).ok_or(Error::KTooLarge { k: nev, n: avail })?);
    let mut worst = T::infinity();
    for restart in 0..=opts.max_restarts {
        let mut exhausted = false;
        loop {
            while w.len() < v.len() {
                let mut out = vec![T::zero(); n];
                op.apply(&v[w.len()], &mut out);
                w.push(out);
            }
            if v.len() >= m {
                break;
            }
            let last = w.last().unwrap();
            let mut f = last.clone();
            let scale = norm(&f);
            orthogonalize(&mut f, locked, &v);
            let fnorm = norm(&f);
            let next = if fnorm > scale * T::lit(1e-10) && fnorm > T::zero() {
                f.iter_mut().for_each(|x| *x /= fnorm);
                Some(f)
            } else {
                fresh_direction(n, locked, &v, rng)
            };
            match next {
                Some(x) => v.push(x),
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        let dim = v.len();
        let mut h = vec![T::zero(); dim * dim];
        h.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            for (j, hij) in row.iter_mut().enumerate() {
                *hij = dot(&v[i], &w[j]);
            }
        });
        for i in 0..dim {
            for j in i + 1..dim {
                let s = (h[i * dim + j] + h[j * dim + i]) * T::lit(0.5);
                h[i * dim + j] = s;
                h[j * dim + i] = s;
            }
        }
        let (theta, s) = symmetric_eigen(&h, dim);
        let want = nev.min(dim);
        let ritz: Vec<(Vec<T>, Vec<T>)> = (0..want)
            .into_par_iter()
            .map(|a| (combine(&v, &s[a]), combine(&w, &s[a])))
            .collect();
        let residuals: Vec<T> = ritz
            .iter()
            .enumerate()
            .map(|(a, (y, by))| {
                by.iter()
                    .zip(y)
                    .map(|(&p, &q)| (p - theta[a] * q) * (p - theta[a] * q))
                    .sum::<T>()
                    .sqrt()
            })
            .collect();
        let scale = T::one().max(theta[want - 1].abs());
        worst = residuals.iter().copied().fold(T::zero(), T::max);
        debug!(
            "lanczos restart {restart}: dim {dim}, nev {nev}, worst residual {:e}",
            worst.as_f64()
        );
        let complete = exhausted || dim == avail;
        if worst <= tol * scale || complete {
            if want < nev {
                return Err(Error::KTooLarge { k: nev, n: dim });
            }
            return Ok(RitzPairs {
                values: theta[..want].to_vec(),
                vectors: ritz.into_iter().map(|(y, _)| y).collect(),
                residuals,
                restarts: restart,
            });
        }
        // Continuation direction: the residual of the last basis vector.
        let mut f = w[dim - 1].clone();
        let fscale = norm(&f);
        orthogonalize(&mut f, locked, &v);
        let fnorm = norm(&f);
        let cont = if fnorm > fscale * T::lit(1e-10) && fnorm > T::zero() {
            f.iter_mut().for_each(|x| *x /= fnorm);
            Some(f)
        } else {
            None
        };
        let kept: Vec<(Vec<T>, Vec<T>)> = (0..keep)
            .into_par_iter()
            .map(|a| (combine(&v, &s[a]), combine(&w, &s[a])))
            .collect();
        v.clear();
        w.clear();
        for (y, by) in kept {
            v.push(y);
            w.push(by);
        }
        // Re-orthonormalize the kept block once to stop drift.
        for i in 0..v.len() {
            let (done, rest) = v.split_at_mut(i);
            let x = &mut rest[0];
            let before = norm(x);
            orthogonalize(x, locked, done);
            let after = norm(x);
            if (after - before).abs() > T::lit(1e-12) * before.max(T::one()) {
                let inv = T::one() / after;
                x.iter_mut().for_each(|t| *t *= inv);
                let mut out = vec![T::zero(); n];
                op.apply(x, &mut out);
                w[i] = out;
            }
        }
        let cont = cont.or_else(|| fresh_direction(n, locked, &v, rng));
        match cont {
            Some(mut c) => {
                orthogonalize(&mut c, locked, &v);
                let cn = norm(&c);
                c.iter_mut().for_each(|x| *x /= cn);
                v.push(c);
            }
            None => {
                // Kept block spans an invariant subspace of the complement.
                w.truncate(v.len());
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_restarts,
        residual: worst.as_f64(),
    })
}
