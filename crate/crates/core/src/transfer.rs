//! Maps between functions on the manifold (sampled on the quadrature set) and
//! graph functions: cell averaging `P`, its adjoint lift `P*`, kernel
//! smoothing `Lambda_r` and interpolation `I = Lambda_{rho - 2 eps} P*`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphFunction;
use crate::manifold::{unit_ball_volume, ManifoldModel, ManifoldPoint, ModeLabel};
use crate::net::{EpsNet, QuadratureSet};
use crate::rng::SeededRng;
use crate::scalar::Real;
use crate::spatial::{for_each_within, NeighborGrid};

/// Upper bound on the number of point pairs visited by [`average_dispersion`].
pub const MAX_DISPERSION_PAIRS: usize = 10_000_000;

/// Values of a function at every quadrature sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction<T>(pub Vec<T>);

impl<T> std::ops::Deref for SampledFunction<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> std::ops::DerefMut for SampledFunction<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T: Real> SampledFunction<T> {
    pub fn constant(q: &QuadratureSet<T>, c: T) -> Self {
        Self(vec![c; q.len()])
    }

    /// Evaluates an exact eigenfunction at every sample.
    pub fn eigenfunction(
        m: &ManifoldModel<T>,
        q: &QuadratureSet<T>,
        label: ModeLabel,
    ) -> Result<Self> {
        m.eval_eigenfunction(label, &q.samples[0])?;
        let values = q
            .samples
            .par_iter()
            .map(|x| m.eval_eigenfunction(label, x).expect("label checked"))
            .collect();
        Ok(Self(values))
    }

    pub fn from_fn(q: &QuadratureSet<T>, f: impl Fn(&ManifoldPoint<T>) -> T + Sync + Send) -> Self {
        Self(q.samples.par_iter().map(f).collect())
    }

    /// `sum_s weight f_s g_s`.
    pub fn inner(&self, other: &Self, q: &QuadratureSet<T>) -> T {
        let s: T = self
            .0
            .par_chunks(4096)
            .zip(other.0.par_chunks(4096))
            .map(|(a, b)| a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y))
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        q.weight * s
    }

    pub fn l2_norm(&self, q: &QuadratureSet<T>) -> T {
        self.inner(self, q).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn scaled(&self, c: T) -> Self {
        Self(self.0.iter().map(|&a| a * c).collect())
    }
}

/// `psi(t) = (n+2)/(2 nu_n) (1 - t^2)` on `[0, 1]` and zero beyond.
pub fn psi<T: Real>(t: T, n: usize) -> T {
    if t > T::one() {
        return T::zero();
    }
    let nu: T = unit_ball_volume(n);
    T::from_usize_lossy(n + 2) / (T::lit(2.0) * nu) * (T::one() - t * t)
}

/// Discretization `(P f)_i`: the quadrature average of `f` over cell `i`.
pub fn discretize_p<T: Real>(net: &EpsNet<T>, f: &SampledFunction<T>) -> Result<GraphFunction<T>> {
    let q = &net.quadrature;
    check_samples(q, f)?;
    let mut sums = vec![T::zero(); net.len()];
    let mut counts = vec![0usize; net.len()];
    for (&c, &v) in q.cell_of_sample.iter().zip(f.iter()) {
        sums[c as usize] += v;
        counts[c as usize] += 1;
    }
    Ok(GraphFunction(
        sums.iter()
            .zip(&counts)
            .map(|(&s, &c)| s / T::from_usize_lossy(c))
            .collect(),
    ))
}

/// Piecewise-constant lift `P* u`: every sample takes the value of its cell.
pub fn lift_pstar<T: Real>(net: &EpsNet<T>, u: &GraphFunction<T>) -> Result<SampledFunction<T>> {
    if u.len() != net.len() {
        return Err(Error::DimensionMismatch {
            expected: net.len(),
            got: u.len(),
        });
    }
    Ok(SampledFunction(
        net.quadrature
            .cell_of_sample
            .iter()
            .map(|&c| u[c as usize])
            .collect(),
    ))
}

fn check_samples<T: Real>(q: &QuadratureSet<T>, f: &SampledFunction<T>) -> Result<()> {
    if f.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Kernel `k_r(x, y) = r^{-n} psi(d(x, y) / r)` integrated against the
/// quadrature measure.
pub struct KernelSmoother<'a, T> {
    manifold: &'a ManifoldModel<T>,
    quadrature: &'a QuadratureSet<T>,
    r: T,
    grid: NeighborGrid<T>,
    peak: T,
}

impl<'a, T: Real> KernelSmoother<'a, T> {
    pub fn new(
        manifold: &'a ManifoldModel<T>,
        quadrature: &'a QuadratureSet<T>,
        r: T,
    ) -> Result<Self> {
        let limit = manifold.injectivity_radius() / T::lit(2.0);
        if !(r > T::zero() && r < limit) {
            return Err(Error::SmoothingRadius {
                r: r.as_f64(),
                limit: limit.as_f64(),
            });
        }
        let n = manifold.dimension();
        let peak = psi(T::zero(), n) / r.powi(n as i32);
        let grid = NeighborGrid::new(manifold, &quadrature.samples, r);
        Ok(Self {
            manifold,
            quadrature,
            r,
            grid,
            peak,
        })
    }

    pub fn radius(&self) -> T {
        self.r
    }

    /// `k_r` as a function of the distance.
    pub fn kernel(&self, d: T) -> T {
        let t = d / self.r;
        if t >= T::one() {
            T::zero()
        } else {
            self.peak * (T::one() - t * t)
        }
    }

    /// `sup k_r = (n+2) / (2 nu_n r^n)`.
    pub fn kernel_peak(&self) -> T {
        self.peak
    }

    /// Calls `visit(sample, weight * k_r(x, sample))` for every sample in the support.
    fn for_each_weight(&self, x: &ManifoldPoint<T>, mut visit: impl FnMut(usize, T)) {
        let w = self.quadrature.weight;
        for_each_within(
            self.manifold,
            &self.grid,
            &self.quadrature.samples,
            x,
            self.r,
            |s, d| visit(s, w * self.kernel(d)),
        );
    }

    /// `Lambda_r^0 f(x) = sum_s weight f_s k_r(x, x_s)` at each evaluation point.
    pub fn lambda0(
        &self,
        f: &SampledFunction<T>,
        eval_points: &[ManifoldPoint<T>],
    ) -> Result<Vec<T>> {
        check_samples(self.quadrature, f)?;
        Ok(eval_points
            .par_iter()
            .map(|x| {
                let mut acc = T::zero();
                self.for_each_weight(x, |s, wk| acc += wk * f[s]);
                acc
            })
            .collect())
    }

    /// `theta = Lambda_r^0(1)` at each evaluation point.
    pub fn theta_at(&self, eval_points: &[ManifoldPoint<T>]) -> Vec<T> {
        eval_points
            .par_iter()
            .map(|x| {
                let mut acc = T::zero();
                self.for_each_weight(x, |_, wk| acc += wk);
                acc
            })
            .collect()
    }

    fn theta_samples(&self) -> Result<Vec<T>> {
        let theta = self.theta_at(&self.quadrature.samples);
        check_theta(&theta)?;
        Ok(theta)
    }
}

fn check_theta<T: Real>(theta: &[T]) -> Result<()> {
    match theta.iter().position(|&t| !(t > T::zero())) {
        Some(s) => Err(Error::ThetaNonpositive {
            sample: s,
            value: theta[s].as_f64(),
        }),
        None => Ok(()),
    }
}

/// Row `s` holds `(j, sum_{s' in V_j} weight * k_r(x_s, x_s'))` for cells `j`
/// reached from sample `s`.
struct CellKernel<T> {
    row_ptr: Vec<usize>,
    cells: Vec<u32>,
    values: Vec<T>,
}

/// Operators bound to one net, graph radius `rho` and smoothing radius `r`,
/// with `theta` cached at every quadrature sample.
pub struct TransferContext<'a, T> {
    net: &'a EpsNet<T>,
    rho: T,
    smoother: KernelSmoother<'a, T>,
    theta: Vec<T>,
    cell_kernel: Option<CellKernel<T>>,
}

impl<'a, T: Real> TransferContext<'a, T> {
    /// Smoothing at an arbitrary radius `r`.
    pub fn new(manifold: &'a ManifoldModel<T>, net: &'a EpsNet<T>, rho: T, r: T) -> Result<Self> {
        let smoother = KernelSmoother::new(manifold, &net.quadrature, r)?;
        let theta = smoother.theta_samples()?;
        Ok(Self {
            net,
            rho,
            smoother,
            theta,
            cell_kernel: None,
        })
    }

    /// Context for the interpolation map, with `r = rho - 2 eps`.
    pub fn for_interpolation(
        manifold: &'a ManifoldModel<T>,
        net: &'a EpsNet<T>,
        rho: T,
    ) -> Result<Self> {
        let r = rho - T::lit(2.0) * net.eps;
        if !(r > T::zero()) {
            return Err(Error::RadiusNonpositive(r.as_f64()));
        }
        let smoother = KernelSmoother::new(manifold, &net.quadrature, r)?;
        let n_cells = net.len();
        let rows: Vec<(Vec<u32>, Vec<T>)> = net
            .quadrature
            .samples
            .par_iter()
            .map_init(
                || (vec![T::zero(); n_cells], Vec::<u32>::new()),
                |(scratch, touched), x| {
                    smoother.for_each_weight(x, |s, wk| {
                        let j = net.quadrature.cell_of_sample[s];
                        if scratch[j as usize] == T::zero() {
                            touched.push(j);
                        }
                        scratch[j as usize] += wk;
                    });
                    touched.sort_unstable();
                    let vals: Vec<T> = touched.iter().map(|&j| scratch[j as usize]).collect();
                    let cells = touched.clone();
                    for &j in touched.iter() {
                        scratch[j as usize] = T::zero();
                    }
                    touched.clear();
                    (cells, vals)
                },
            )
            .collect();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let total: usize = rows.iter().map(|r| r.0.len()).sum();
        let mut cells = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        let mut theta = Vec::with_capacity(rows.len());
        for (c, v) in rows {
            theta.push(v.iter().copied().sum::<T>());
            cells.extend(c);
            values.extend(v);
            row_ptr.push(cells.len());
        }
        check_theta(&theta)?;
        Ok(Self {
            net,
            rho,
            smoother,
            theta,
            cell_kernel: Some(CellKernel {
                row_ptr,
                cells,
                values,
            }),
        })
    }

    pub fn net(&self) -> &EpsNet<T> {
        self.net
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn radius(&self) -> T {
        self.smoother.r
    }

    pub fn smoother(&self) -> &KernelSmoother<'a, T> {
        &self.smoother
    }

    pub fn quadrature(&self) -> &QuadratureSet<T> {
        &self.net.quadrature
    }

    /// `theta` at every quadrature sample.
    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn discretize_p(&self, f: &SampledFunction<T>) -> Result<GraphFunction<T>> {
        discretize_p(self.net, f)
    }

    pub fn lift_pstar(&self, u: &GraphFunction<T>) -> Result<SampledFunction<T>> {
        lift_pstar(self.net, u)
    }

    pub fn smooth_lambda0(
        &self,
        f: &SampledFunction<T>,
        eval_points: &[ManifoldPoint<T>],
    ) -> Result<Vec<T>> {
        self.smoother.lambda0(f, eval_points)
    }

    /// `Lambda_r f = Lambda_r^0 f / theta` at every quadrature sample.
    /// Evaluated as `f_s + sum weight k (f_s' - f_s) / theta_s`, which keeps
    /// constants fixed exactly.
    pub fn smooth_lambda(&self, f: &SampledFunction<T>) -> Result<SampledFunction<T>> {
        check_samples(self.quadrature(), f)?;
        let samples = &self.net.quadrature.samples;
        Ok(SampledFunction(
            samples
                .par_iter()
                .enumerate()
                .map(|(s, x)| {
                    let fs = f[s];
                    let mut acc = T::zero();
                    self.smoother
                        .for_each_weight(x, |t, wk| acc += wk * (f[t] - fs));
                    fs + acc / self.theta[s]
                })
                .collect(),
        ))
    }

    /// [`smooth_lambda`](Self::smooth_lambda) for several functions in one pass.
    pub fn smooth_lambda_many(
        &self,
        fs: &[&SampledFunction<T>],
    ) -> Result<Vec<SampledFunction<T>>> {
        for f in fs {
            check_samples(self.quadrature(), f)?;
        }
        let samples = &self.net.quadrature.samples;
        let rows: Vec<Vec<T>> = samples
            .par_iter()
            .enumerate()
            .map(|(s, x)| {
                let mut acc = vec![T::zero(); fs.len()];
                self.smoother.for_each_weight(x, |t, wk| {
                    for (a, f) in acc.iter_mut().zip(fs) {
                        *a += wk * (f[t] - f[s]);
                    }
                });
                acc.iter()
                    .zip(fs)
                    .map(|(&a, f)| f[s] + a / self.theta[s])
                    .collect()
            })
            .collect();
        Ok((0..fs.len())
            .map(|a| SampledFunction(rows.iter().map(|r| r[a]).collect()))
            .collect())
    }

    /// `I u = Lambda_{rho - 2 eps} P* u` at every quadrature sample.
    pub fn interpolate_i(&self, u: &GraphFunction<T>) -> Result<SampledFunction<T>> {
        let kernel = self.cell_kernel.as_ref().ok_or_else(|| {
            Error::InvalidParameter("context was not built for interpolation".into())
        })?;
        if u.len() != self.net.len() {
            return Err(Error::DimensionMismatch {
                expected: self.net.len(),
                got: u.len(),
            });
        }
        let cells_of = &self.net.quadrature.cell_of_sample;
        Ok(SampledFunction(
            (0..cells_of.len())
                .into_par_iter()
                .with_min_len(1024)
                .map(|s| {
                    let anchor = u[cells_of[s] as usize];
                    let range = kernel.row_ptr[s]..kernel.row_ptr[s + 1];
                    let mut acc = T::zero();
                    for (&j, &k) in kernel.cells[range.clone()]
                        .iter()
                        .zip(&kernel.values[range])
                    {
                        acc += k * (u[j as usize] - anchor);
                    }
                    anchor + acc / self.theta[s]
                })
                .collect(),
        ))
    }
}

/// Monte-Carlo estimate of the average dispersion with its sampling record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DispersionEstimate {
    pub value: f64,
    /// Outer samples used; the inner sum always runs over all samples.
    pub outer_samples: usize,
    pub pairs: usize,
    pub seed: u64,
}

/// `E_r(f) = int_M int_{B_r(x)} |f(y) - f(x)|^2 dy dx` over quadrature pairs.
/// Outer points are subsampled (without replacement, seeded) so that at most
/// `max_pairs` pairs are visited; the outer sum is reweighted by `vol / outer`.
pub fn average_dispersion<T: Real>(
    manifold: &ManifoldModel<T>,
    q: &QuadratureSet<T>,
    f: &SampledFunction<T>,
    r: T,
    max_pairs: usize,
    seed: u64,
) -> Result<DispersionEstimate> {
    average_dispersion_sum(manifold, q, &[f], r, max_pairs, seed)
}

/// `sum_a E_r(f_a)` with one shared set of pairs.
pub fn average_dispersion_sum<T: Real>(
    manifold: &ManifoldModel<T>,
    q: &QuadratureSet<T>,
    fs: &[&SampledFunction<T>],
    r: T,
    max_pairs: usize,
    seed: u64,
) -> Result<DispersionEstimate> {
    for f in fs {
        check_samples(q, f)?;
    }
    let limit = manifold.injectivity_radius() / T::lit(2.0);
    if !(r > T::zero() && r < limit) {
        return Err(Error::SmoothingRadius {
            r: r.as_f64(),
            limit: limit.as_f64(),
        });
    }
    let vol = manifold.volume();
    let outer = outer_subsample(manifold, q.len(), r, max_pairs, seed);
    let grid = NeighborGrid::new(manifold, &q.samples, r);
    let parts: Vec<(T, usize)> = outer
        .par_iter()
        .map(|&s| {
            let x = &q.samples[s];
            let mut acc = T::zero();
            let mut count = 0usize;
            for_each_within(manifold, &grid, &q.samples, x, r, |t, _| {
                for f in fs {
                    let d = f[t] - f[s];
                    acc += d * d;
                }
                count += 1;
            });
            (acc, count)
        })
        .collect();
    let mut total = T::zero();
    let mut pairs = 0;
    for (a, c) in parts {
        total += a;
        pairs += c;
    }
    let value = vol / T::from_usize_lossy(outer.len()) * q.weight * total;
    Ok(DispersionEstimate {
        value: value.as_f64(),
        outer_samples: outer.len(),
        pairs,
        seed,
    })
}

/// Sorted sample indices, drawn without replacement, such that about
/// `max_pairs` pairs lie within distance `r` of them.
pub fn outer_subsample<T: Real>(
    manifold: &ManifoldModel<T>,
    q_len: usize,
    r: T,
    max_pairs: usize,
    seed: u64,
) -> Vec<usize> {
    let n = manifold.dimension();
    let ball: T = unit_ball_volume::<T>(n) * r.powi(n as i32);
    let per_outer = (T::from_usize_lossy(q_len) * ball / manifold.volume())
        .to_f64()
        .unwrap_or(1.0)
        .max(1.0);
    let outer = ((max_pairs as f64 / per_outer).floor() as usize).clamp(1, q_len);
    let mut idx: Vec<usize> = (0..q_len).collect();
    if outer < q_len {
        let mut rng = SeededRng::new(seed);
        for i in 0..outer {
            let j = i + rng.index(q_len - i);
            idx.swap(i, j);
        }
        idx.truncate(outer);
        idx.sort_unstable();
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::build_net;

    #[test]
    fn psi_values() {
        assert!((psi(0.0f64, 2) - 4.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert_eq!(psi(1.0f64, 3), 0.0);
        assert_eq!(psi(2.0f64, 1), 0.0);
    }

    #[test]
    fn constants_are_preserved() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let net = build_net(&s, 0.3, &mut SeededRng::new(2), 40).unwrap();
        let ctx = TransferContext::for_interpolation(&s, &net, 0.75).unwrap();
        let one = SampledFunction::constant(ctx.quadrature(), 2.5);
        assert!(ctx.smooth_lambda(&one).unwrap().iter().all(|&v| v == 2.5));
        let u = GraphFunction::constant(net.len(), -1.25);
        assert!(ctx.interpolate_i(&u).unwrap().iter().all(|&v| v == -1.25));
        assert!(ctx.discretize_p(&one).unwrap().iter().all(|&v| v == 2.5));
        assert!(ctx.lift_pstar(&u).unwrap().iter().all(|&v| v == -1.25));
    }

    #[test]
    fn interpolation_matches_smoothing_the_lift() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let net = build_net(&s, 0.3, &mut SeededRng::new(3), 40).unwrap();
        let ctx = TransferContext::for_interpolation(&s, &net, 0.8).unwrap();
        let mut rng = SeededRng::new(5);
        let u = GraphFunction((0..net.len()).map(|_| rng.normal::<f64>()).collect());
        let a = ctx.interpolate_i(&u).unwrap();
        let b = ctx.smooth_lambda(&ctx.lift_pstar(&u).unwrap()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        // The plain context has no cell kernel.
        let plain = TransferContext::new(&s, &net, 0.8, 0.2).unwrap();
        assert!(plain.interpolate_i(&u).is_err());
    }

    #[test]
    fn smoothing_radius_validation() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let net = build_net(&s, 0.3, &mut SeededRng::new(2), 20).unwrap();
        assert!(matches!(
            TransferContext::for_interpolation(&s, &net, 0.6),
            Err(Error::RadiusNonpositive(_))
        ));
        assert!(matches!(
            TransferContext::new(&s, &net, 0.8, 2.0),
            Err(Error::SmoothingRadius { .. })
        ));
    }

    #[test]
    fn lambda0_vanishes_outside_support() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let net = build_net(&s, 0.3, &mut SeededRng::new(2), 20).unwrap();
        let sm = KernelSmoother::new(&s, &net.quadrature, 0.2).unwrap();
        let north = ManifoldPoint::new([0.0, 0.0, 1.0]);
        let f =
            SampledFunction::from_fn(
                &net.quadrature,
                |x| if x.coords[2] < 0.5 { 1.0 } else { 0.0 },
            );
        assert_eq!(sm.lambda0(&f, &[north]).unwrap()[0], 0.0);
        assert!(sm.kernel(0.0) <= 4.0 / (2.0 * std::f64::consts::PI * 0.04) + 1e-12);
        assert_eq!(sm.kernel(0.2), 0.0);
    }

    #[test]
    fn dispersion_is_quadratic_and_zero_on_constants() {
        let s = ManifoldModel::sphere2(1.0).unwrap();
        let net = build_net(&s, 0.3, &mut SeededRng::new(2), 20).unwrap();
        let q = &net.quadrature;
        let c = SampledFunction::constant(q, 3.0);
        assert_eq!(
            average_dispersion(&s, q, &c, 0.2, 1_000_000, 1)
                .unwrap()
                .value,
            0.0
        );
        let f = SampledFunction::from_fn(q, |x| x.coords[2]);
        let a = average_dispersion(&s, q, &f, 0.2, 1_000_000, 1).unwrap();
        let b = average_dispersion(&s, q, &f.scaled(3.0), 0.2, 1_000_000, 1).unwrap();
        assert!((b.value - 9.0 * a.value).abs() < 1e-12 * b.value);
        assert!(a.pairs <= 1_100_000);
    }
}
