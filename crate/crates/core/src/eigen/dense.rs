//! Dense symmetric kernels: Householder tridiagonalization, implicit QL,
//! tridiagonal inverse iteration and a small Jacobi SVD.
//!
//! Matrices are row-major `n x n` slices.

use rayon::prelude::*;

use crate::rng::SeededRng;
use crate::scalar::{axpy, cmp_real, dot, Real};

/// Householder reflector `I - beta v v^T` acting on indices `offset..n`.
pub(crate) struct Reflector<T> {
    offset: usize,
    beta: T,
    v: Vec<T>,
}

/// Tridiagonal form `Q^T A Q = T` with diagonal `d` and off-diagonal `e`
/// (`e[i]` couples `i` and `i+1`).
pub(crate) struct Tridiagonal<T> {
    pub d: Vec<T>,
    pub e: Vec<T>,
    reflectors: Vec<Reflector<T>>,
}

/// Reduces the symmetric matrix `a` (destroyed) to tridiagonal form.
pub(crate) fn tridiagonalize<T: Real>(a: &mut [T], n: usize) -> Tridiagonal<T> {
    assert_eq!(a.len(), n * n);
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n.saturating_sub(1)];
    let mut reflectors = Vec::new();
    for k in 0..n.saturating_sub(2) {
        let off = k + 1;
        let len = n - off;
        let x: Vec<T> = a[k * n + off..k * n + n].to_vec();
        let norm = dot(&x, &x).sqrt();
        d[k] = a[k * n + k];
        if norm == T::zero() {
            e[k] = T::zero();
            continue;
        }
        let alpha = if x[0] > T::zero() { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vv = dot(&v, &v);
        e[k] = alpha;
        if vv == T::zero() {
            continue;
        }
        let beta = T::lit(2.0) / vv;
        // p = beta * S v over the trailing block S = a[off.., off..].
        let p: Vec<T> = (0..len)
            .into_par_iter()
            .with_min_len(64)
            .map(|i| {
                let row = &a[(off + i) * n + off..(off + i) * n + n];
                beta * dot(row, &v)
            })
            .collect();
        let kappa = beta / T::lit(2.0) * dot(&p, &v);
        let w: Vec<T> = p.iter().zip(&v).map(|(&pi, &vi)| pi - kappa * vi).collect();
        a[off * n..]
            .par_chunks_mut(n)
            .with_min_len(32)
            .enumerate()
            .for_each(|(i, row)| {
                let (vi, wi) = (v[i], w[i]);
                for ((dst, &vj), &wj) in row[off..].iter_mut().zip(&v).zip(&w) {
                    *dst -= vi * wj + wi * vj;
                }
            });
        reflectors.push(Reflector {
            offset: off,
            beta,
            v,
        });
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 2) * n + n - 1];
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1) * n + n - 1];
    }
    Tridiagonal { d, e, reflectors }
}

impl<T: Real> Tridiagonal<T> {
    /// Maps an eigenvector of `T` to an eigenvector of the original matrix.
    pub(crate) fn back_transform(&self, z: &mut [T]) {
        for r in self.reflectors.iter().rev() {
            let tail = &mut z[r.offset..];
            let s = r.beta * dot(&r.v, tail);
            axpy(-s, &r.v, tail);
        }
    }

    pub(crate) fn one_norm(&self) -> T {
        let n = self.d.len();
        (0..n)
            .map(|i| {
                let mut s = self.d[i].abs();
                if i > 0 {
                    s += self.e[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.e[i].abs();
                }
                s
            })
            .fold(T::zero(), T::max)
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. When `z` is given (row `i`
/// holds the `i`-th basis vector, length `cols`), rotations are applied to the
/// rows so that on exit row `i` carries the eigenvector of eigenvalue `i`.
/// Returns eigenvalues ascending (rows of `z` permuted to match).
fn implicit_ql<T: Real>(d: &[T], e: &[T], mut z: Option<(&mut [T], usize)>) -> Vec<T> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<T> = e.to_vec();
    e.push(T::zero());
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    break;
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some((zz, cols)) = z.as_mut() {
                        let cols = *cols;
                        let (lo, hi) = zz.split_at_mut((i + 1) * cols);
                        let zi = &mut lo[i * cols..];
                        let zi1 = &mut hi[..cols];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let hb = *b;
                            *b = s * *a + c * hb;
                            *a = c * *a - s * hb;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_real(d[a], d[b]).then(a.cmp(&b)));
    if let Some((zz, cols)) = z {
        let old = zz.to_vec();
        for (dst, &src) in order.iter().enumerate() {
            zz[dst * cols..(dst + 1) * cols].copy_from_slice(&old[src * cols..(src + 1) * cols]);
        }
    }
    order.iter().map(|&i| d[i]).collect()
}

pub(crate) fn tridiagonal_eigenvalues<T: Real>(d: &[T], e: &[T]) -> Vec<T> {
    if d.is_empty() {
        return Vec::new();
    }
    implicit_ql(d, e, None)
}

/// All eigenpairs of a small dense symmetric matrix, ascending.
/// Returns `(values, vectors)` with `vectors[i]` the `i`-th unit eigenvector.
pub(crate) fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<Vec<T>>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut work = a.to_vec();
    let tri = tridiagonalize(&mut work, n);
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    let values = implicit_ql(&tri.d, &tri.e, Some((&mut z, n)));
    let vectors = z
        .chunks(n)
        .map(|row| {
            let mut v = row.to_vec();
            tri.back_transform(&mut v);
            v
        })
        .collect();
    (values, vectors)
}

/// Solves `(T - sigma I) x = b` by Gaussian elimination with partial pivoting.
/// Zero pivots are replaced by `tiny`.
fn shifted_tridiagonal_solve<T: Real>(d: &[T], e: &[T], sigma: T, b: &mut [T], tiny: T) {
    let n = d.len();
    if n == 1 {
        let p = d[0] - sigma;
        b[0] /= if p.abs() < tiny { tiny } else { p };
        return;
    }
    let mut u0: Vec<T> = d.iter().map(|&x| x - sigma).collect();
    let mut u1: Vec<T> = e.to_vec();
    u1.push(T::zero());
    let mut u2 = vec![T::zero(); n];
    let mut mult = vec![T::zero(); n];
    let mut swapped = vec![false; n];
    for i in 0..n - 1 {
        let sub = e[i];
        let next_diag = u0[i + 1];
        let next_super = if i + 1 < n - 1 { e[i + 1] } else { T::zero() };
        if u0[i].abs() >= sub.abs() {
            if u0[i].abs() < tiny {
                u0[i] = tiny;
            }
            let m = sub / u0[i];
            mult[i] = m;
            u0[i + 1] = next_diag - m * u1[i];
            u1[i + 1] = next_super;
        } else {
            let m = u0[i] / sub;
            mult[i] = m;
            swapped[i] = true;
            let old_u1 = u1[i];
            u0[i] = sub;
            u1[i] = next_diag;
            u2[i] = next_super;
            u0[i + 1] = old_u1 - m * next_diag;
            u1[i + 1] = -m * next_super;
        }
    }
    if u0[n - 1].abs() < tiny {
        u0[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            b.swap(i, i + 1);
        }
        let bi = b[i];
        b[i + 1] -= mult[i] * bi;
    }
    b[n - 1] /= u0[n - 1];
    b[n - 2] = (b[n - 2] - u1[n - 2] * b[n - 1]) / u0[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - u1[i] * b[i + 1] - u2[i] * b[i + 2]) / u0[i];
    }
}

fn tridiagonal_apply<T: Real>(d: &[T], e: &[T], x: &[T], out: &mut [T]) {
    let n = d.len();
    for i in 0..n {
        let mut s = d[i] * x[i];
        if i > 0 {
            s += e[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += e[i] * x[i + 1];
        }
        out[i] = s;
    }
}

fn normalize<T: Real>(x: &mut [T]) -> T {
    let nrm = dot(x, x).sqrt();
    if nrm > T::zero() {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
    nrm
}

/// Eigenvectors of the tridiagonal matrix for the given (accurate) eigenvalues.
/// Each vector is orthogonalized against all previously computed ones, which
/// also separates exactly repeated eigenvalues.
pub(crate) fn tridiagonal_inverse_iteration<T: Real>(
    d: &[T],
    e: &[T],
    values: &[T],
    rng: &mut SeededRng,
) -> Vec<Vec<T>> {
    let n = d.len();
    let scale = {
        let mut s = T::zero();
        for i in 0..n {
            let mut r = d[i].abs();
            if i > 0 {
                r += e[i - 1].abs();
            }
            if i + 1 < n {
                r += e[i].abs();
            }
            s = s.max(r);
        }
        s.max(T::min_positive_value())
    };
    let tiny = T::epsilon() * scale;
    let mut out: Vec<Vec<T>> = Vec::with_capacity(values.len());
    let mut tx = vec![T::zero(); n];
    for &lam in values {
        let mut x: Vec<T> = (0..n).map(|_| rng.unit::<T>() - T::lit(0.5)).collect();
        for prev in &out {
            let c = dot(prev, &x);
            axpy(-c, prev, &mut x);
        }
        normalize(&mut x);
        for _ in 0..8 {
            shifted_tridiagonal_solve(d, e, lam, &mut x, tiny);
            for _ in 0..2 {
                for prev in &out {
                    let c = dot(prev, &x);
                    axpy(-c, prev, &mut x);
                }
            }
            if normalize(&mut x) == T::zero() {
                x = (0..n).map(|_| rng.unit::<T>() - T::lit(0.5)).collect();
                normalize(&mut x);
                continue;
            }
            tridiagonal_apply(d, e, &x, &mut tx);
            let res = tx
                .iter()
                .zip(&x)
                .map(|(&a, &b)| (a - lam * b) * (a - lam * b))
                .sum::<T>()
                .sqrt();
            if res <= T::lit(16.0) * T::epsilon() * scale * T::from_usize_lossy(n).sqrt() {
                break;
            }
        }
        out.push(x);
    }
    out
}

/// Orthogonal polar factor of a small square matrix `c` (row-major `m x m`):
/// the orthogonal `O` maximizing `trace(O^T c)`.
pub(crate) fn orthogonal_polar<T: Real>(c: &[T], m: usize) -> Vec<T> {
    let (u, _s, v) = jacobi_svd(c, m);
    let mut o = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..m {
            let mut s = T::zero();
            for k in 0..m {
                s += u[i * m + k] * v[j * m + k];
            }
            o[i * m + j] = s;
        }
    }
    o
}

/// One-sided Jacobi SVD of a square matrix: `a = U diag(s) V^T`.
pub(crate) fn jacobi_svd<T: Real>(a: &[T], m: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    // Work on columns: cols[j] is column j of a.
    let mut cols: Vec<Vec<T>> = (0..m)
        .map(|j| (0..m).map(|i| a[i * m + j]).collect())
        .collect();
    let mut vcols: Vec<Vec<T>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|i| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let tol = T::epsilon() * T::lit(4.0);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                for k in 0..m {
                    let (x, y) = (cols[p][k], cols[q][k]);
                    cols[p][k] = cs * x - sn * y;
                    cols[q][k] = sn * x + cs * y;
                    let (x, y) = (vcols[p][k], vcols[q][k]);
                    vcols[p][k] = cs * x - sn * y;
                    vcols[q][k] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let smax = s.iter().copied().fold(T::zero(), T::max);
    let mut ucols: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut deficient = Vec::new();
    for j in 0..m {
        if s[j] > smax * T::epsilon() * T::from_usize_lossy(m) && s[j] > T::zero() {
            ucols.push(cols[j].iter().map(|&x| x / s[j]).collect());
        } else {
            ucols.push(vec![T::zero(); m]);
            deficient.push(j);
        }
    }
    // Complete U with an orthonormal basis of the remaining directions.
    for j in deficient {
        for basis in 0..m {
            let mut cand: Vec<T> = (0..m)
                .map(|i| if i == basis { T::one() } else { T::zero() })
                .collect();
            for (k, u) in ucols.iter().enumerate() {
                if k != j {
                    let c = dot(u, &cand);
                    axpy(-c, u, &mut cand);
                }
            }
            if normalize(&mut cand) > T::lit(1e-3) {
                ucols[j] = cand;
                break;
            }
        }
    }
    let mut u = vec![T::zero(); m * m];
    let mut v = vec![T::zero(); m * m];
    for j in 0..m {
        for i in 0..m {
            u[i * m + j] = ucols[j][i];
            v[i * m + j] = vcols[j][i];
        }
    }
    (u, s, v)
}
