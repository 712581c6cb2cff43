//! Eigenfunction alignment: graph eigenvectors of a multiplicity cluster
//! against the discretized exact eigenfunctions, up to an orthogonal change
//! of basis within the cluster.

use log::warn;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::sweep::{run_sweep_with_artifacts, LevelArtifacts, EXTRA_PAIRS};
use crate::eigen::{cluster_eigenvalues, orthogonal_polar, spectral_projection};
use crate::error::{Error, Result};
use crate::graph::GraphFunction;
use crate::manifold::{ExactSpectrum, ManifoldModel};
use crate::transfer::{SampledFunction, TransferContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub level: usize,
    pub eps: f64,
    pub rho: f64,
    /// Position of the cluster in the exact spectrum (0 is the constants).
    pub cluster: usize,
    /// 0-based index of the first eigenvalue of the cluster.
    pub first: usize,
    pub multiplicity: usize,
    pub lambda: f64,
    /// `min{1, lambda_k - lambda_{k-1}, lambda_{k+m} - lambda_{k+m-1}}`.
    pub delta_lambda: f64,
    pub graph_eigenvalues: Vec<f64>,
    /// Set when the graph spectrum has no gap-separated cluster at these indices.
    pub cluster_mismatch: Option<String>,
    /// `min_O sum_j ||u_j - P g_j||^2` in the `mu` norm.
    pub misfit_p: f64,
    /// `min_O sum_j ||g_j - I u_j||^2` in `L^2(M)`; `None` where `rho <= 2 eps`.
    pub misfit_i: Option<f64>,
    /// `||P f_j - proj P f_j||^2` for the spectral window of half-width
    /// `delta_lambda / 2`; `None` if the window is not resolved.
    pub leakage: Option<Vec<f64>>,
}

/// Spectral separation of the exact cluster `first..first+m`.
pub fn delta_lambda(exact: &[f64], first: usize, m: usize) -> Option<f64> {
    let mut d = 1.0f64;
    if first > 0 {
        d = d.min(exact[first] - exact[first - 1]);
    }
    let next = *exact.get(first + m)?;
    Some(d.min(next - exact[first + m - 1]))
}

/// Orthogonal Procrustes: returns `(O, misfit)` minimizing
/// `sum_j ||targets_j - sum_i O_ij basis_i||^2` for the given inner product.
fn procrustes<V>(basis: &[V], targets: &[V], inner: impl Fn(&V, &V) -> f64) -> (Vec<f64>, f64) {
    let m = basis.len();
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            c[i * m + j] = inner(&basis[i], &targets[j]);
        }
    }
    let o = orthogonal_polar(&c, m);
    // ||t_j - B o_j||^2 = ||t_j||^2 - 2 o_j . c_j + o_j^T G o_j
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            gram[i * m + k] = inner(&basis[i], &basis[k]);
        }
    }
    let mut misfit = 0.0;
    for j in 0..m {
        let mut val = inner(&targets[j], &targets[j]);
        for i in 0..m {
            val -= 2.0 * o[i * m + j] * c[i * m + j];
            for k in 0..m {
                val += o[i * m + j] * gram[i * m + k] * o[k * m + j];
            }
        }
        misfit += val;
    }
    (o, misfit.max(0.0))
}

fn combine_graph(
    basis: &[GraphFunction<f64>],
    coeffs: impl Fn(usize) -> f64,
) -> GraphFunction<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (i, b) in basis.iter().enumerate() {
        let c = coeffs(i);
        for (o, &x) in out.iter_mut().zip(b.iter()) {
            *o += c * x;
        }
    }
    GraphFunction(out)
}

/// Alignment records for every exact cluster lying within the first
/// `k_target` eigenvalues, at one level.
pub fn align_level(
    m: &ManifoldModel<f64>,
    exact: &ExactSpectrum<f64>,
    artifacts: &LevelArtifacts,
    k_target: usize,
    cluster_rel_gap: f64,
    interp: Option<&TransferContext<'_, f64>>,
) -> Result<Vec<AlignmentRecord>> {
    let net = &artifacts.net;
    let graph = &artifacts.graph;
    let spec = &artifacts.spectrum;
    let q = &net.quadrature;
    let graph_clusters = cluster_eigenvalues(&spec.eigenvalues, cluster_rel_gap);
    let mut out = Vec::new();
    for (ci, range) in exact.clusters().into_iter().enumerate() {
        if range.end > k_target || range.end > spec.len() {
            break;
        }
        let first = range.start;
        let mult = range.len();
        let lambda = exact.eigenvalues[first];
        let Some(delta) = delta_lambda(&exact.eigenvalues, first, mult) else {
            break;
        };
        let cluster_mismatch = if graph_clusters.contains(&range) {
            None
        } else {
            let msg = format!(
                "graph eigenvalues {:?} do not form a separated cluster at indices {}..{}",
                &spec.eigenvalues[first..range.end],
                first + 1,
                range.end
            );
            warn!("level {}: {msg}", artifacts.level);
            Some(msg)
        };
        let fs: Vec<SampledFunction<f64>> = range
            .clone()
            .map(|a| SampledFunction::eigenfunction(m, q, exact.labels[a]))
            .collect::<Result<_>>()?;
        let pfs: Vec<GraphFunction<f64>> = fs
            .iter()
            .map(|f| crate::transfer::discretize_p(net, f))
            .collect::<Result<_>>()?;
        let us: Vec<GraphFunction<f64>> = spec.eigenvectors[range.clone()].to_vec();
        let (_, misfit_p) = procrustes(&pfs, &us, |a, b| graph.inner(a, b));
        let misfit_i = match interp {
            Some(ctx) => {
                let ius: Vec<SampledFunction<f64>> = us
                    .iter()
                    .map(|u| ctx.interpolate_i(u))
                    .collect::<Result<_>>()?;
                Some(procrustes(&fs, &ius, |a, b| a.inner(b, q)).1)
            }
            None => None,
        };
        let gamma = delta / 2.0;
        let mut leakage = Some(Vec::with_capacity(mult));
        for pf in &pfs {
            match spectral_projection(graph, spec, pf, lambda - gamma, lambda + gamma) {
                Ok(p) => {
                    let diff = combine_graph(&[pf.clone(), p], |i| if i == 0 { 1.0 } else { -1.0 });
                    if let Some(l) = leakage.as_mut() {
                        l.push(graph.inner(&diff, &diff));
                    }
                }
                Err(Error::IntervalNotResolved { .. }) => leakage = None,
                Err(e) => return Err(e),
            }
        }
        out.push(AlignmentRecord {
            level: artifacts.level,
            eps: artifacts.eps,
            rho: artifacts.rho,
            cluster: ci,
            first,
            multiplicity: mult,
            lambda,
            delta_lambda: delta,
            graph_eigenvalues: spec.eigenvalues[range.clone()].to_vec(),
            cluster_mismatch,
            misfit_p,
            misfit_i,
            leakage,
        });
    }
    Ok(out)
}

/// Runs the sweep and aligns every level where it succeeded.
pub fn alignment_experiment(
    cfg: &SweepConfig,
    cluster_rel_gap: f64,
) -> Result<Vec<AlignmentRecord>> {
    let (_, artifacts) = run_sweep_with_artifacts(cfg)?;
    alignment_from_artifacts(cfg, &artifacts, cluster_rel_gap)
}

pub fn alignment_from_artifacts(
    cfg: &SweepConfig,
    artifacts: &[Option<LevelArtifacts>],
    cluster_rel_gap: f64,
) -> Result<Vec<AlignmentRecord>> {
    let m = cfg.model()?;
    let exact = m.exact_spectrum(cfg.k_target + EXTRA_PAIRS + 10)?;
    let mut out = Vec::new();
    for a in artifacts.iter().flatten() {
        let ctx = if cfg.interpolation_defined(a.level) {
            Some(TransferContext::for_interpolation(&m, &a.net, a.rho)?)
        } else {
            None
        };
        out.extend(align_level(
            &m,
            &exact,
            a,
            cfg.k_target,
            cluster_rel_gap,
            ctx.as_ref(),
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_lambda_uses_both_gaps() {
        let ev = [0.0, 2.0, 2.0, 2.0, 6.0];
        assert_eq!(delta_lambda(&ev, 0, 1), Some(1.0));
        assert_eq!(delta_lambda(&ev, 1, 3), Some(1.0));
        let tight = [0.0, 0.5, 0.5, 0.8];
        assert!((delta_lambda(&tight, 1, 2).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(delta_lambda(&ev, 4, 1), None);
    }

    #[test]
    fn procrustes_recovers_a_rotation() {
        let basis = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let (c, s) = (0.6f64, 0.8f64);
        let targets = vec![vec![c, s, 0.0], vec![-s, c, 0.0]];
        let dot = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (o, misfit) = procrustes(&basis, &targets, dot);
        assert!(misfit < 1e-24);
        assert!((o[0] - c).abs() < 1e-12 && (o[2] - s).abs() < 1e-12);
        let flipped = vec![vec![-1.0, 0.0, 0.0]];
        let (o, misfit) = procrustes(&basis[..1], &flipped, dot);
        assert_eq!(o, vec![-1.0]);
        assert!(misfit < 1e-24);
    }
}
