use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alignment::AlignmentRecord;
use super::config::{RhoRule, SweepConfig};
use crate::eigen::{smallest_k_with, SolverOptions, SpectrumResult};
use crate::error::{Error, Result};
use crate::graph::{build_graph, WeightedGraph};
use crate::manifold::{ExactSpectrum, ManifoldModel};
use crate::net::{build_net, EpsNet};
use crate::rng::SeededRng;

/// Extra eigenpairs solved beyond `k_target`.
pub const EXTRA_PAIRS: usize = 5;

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "LAPLACENET_WORKERS";

/// Net, graph and spectrum produced for one sweep level.
pub struct LevelArtifacts {
    pub level: usize,
    pub eps: f64,
    pub rho: f64,
    pub seed: u64,
    pub net: EpsNet<f64>,
    pub graph: WeightedGraph<f64>,
    pub spectrum: SpectrumResult<f64>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum LevelStatus {
    Ok,
    Failed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub eps: f64,
    pub rho: f64,
    #[serde(flatten)]
    pub status: LevelStatus,
    pub n: usize,
    pub edges: usize,
    pub components: usize,
    /// `lambda_1..lambda_{k_target}` of the graph (empty when failed).
    pub lambda_graph: Vec<f64>,
    pub lambda_exact: Vec<f64>,
    pub abs_err: Vec<f64>,
    /// `abs_err / lambda_exact`, or `abs_err` where the exact value is zero.
    pub rel_err: Vec<f64>,
    /// Mean of `rel_err` over `k = 2..k_target`.
    pub mean_rel_err: Option<f64>,
    pub max_residual: Option<f64>,
    pub runtime_s: f64,
}

impl LevelResult {
    pub fn is_ok(&self) -> bool {
        self.status == LevelStatus::Ok
    }

    /// The combined small parameter `eps/rho + rho`.
    pub fn scale(&self) -> f64 {
        self.eps / self.rho + self.rho
    }
}

/// Least-squares fit of `log y = slope * log x + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SlopeFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Option<Self> {
        let pts: Vec<(f64, f64)> = x
            .iter()
            .zip(y)
            .filter(|(a, b)| **a > 0.0 && **b > 0.0)
            .map(|(a, b)| (a.ln(), b.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        Some(Self {
            slope,
            intercept: my - slope * mx,
            x: x.to_vec(),
            y: y.to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub manifold: String,
    pub rho_rule: RhoRule,
    pub k_target: usize,
    pub seed: u64,
    /// Ordered by decreasing `eps/rho + rho`.
    pub levels: Vec<LevelResult>,
    /// Slope of mean relative error against `eps/rho + rho`, fitted over
    /// successful levels when there are at least three.
    pub slope: Option<SlopeFit>,
    #[serde(default)]
    pub alignment: Vec<AlignmentRecord>,
}

impl ConvergenceReport {
    pub fn successful(&self) -> impl Iterator<Item = &LevelResult> {
        self.levels.iter().filter(|l| l.is_ok())
    }

    /// Writes one row per level and `k = 1..k_target`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "level,eps,rho,N,edges,k,lambda_graph,lambda_exact,abs_err,rel_err,status"
        )?;
        for l in &self.levels {
            for k in 0..self.k_target {
                let exact = l
                    .lambda_exact
                    .get(k)
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                match &l.status {
                    LevelStatus::Ok => writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},ok",
                        l.level + 1,
                        l.eps,
                        l.rho,
                        l.n,
                        l.edges,
                        k + 1,
                        l.lambda_graph[k],
                        exact,
                        l.abs_err[k],
                        l.rel_err[k]
                    )?,
                    LevelStatus::Failed { .. } => writeln!(
                        out,
                        "{},{},{},,,{},,{},,,failed",
                        l.level + 1,
                        l.eps,
                        l.rho,
                        k + 1,
                        exact
                    )?,
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Writes `convergence.csv` or `convergence.json` into `dir`.
pub fn emit_report(
    report: &ConvergenceReport,
    format: ReportFormat,
    dir: impl AsRef<Path>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match format {
        ReportFormat::Csv => {
            let path = dir.join("convergence.csv");
            std::fs::write(&path, report.to_csv_string()).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        }
        ReportFormat::Json => {
            let path = dir.join("convergence.json");
            report.save_json(&path)?;
            Ok(path)
        }
    }
}

/// Rayon pool capped by `LAPLACENET_WORKERS` when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::Config(format!("{WORKERS_ENV} = `{v}` is not a positive integer"))
        })?;
        if n == 0 {
            return Err(Error::Config(format!("{WORKERS_ENV} must be positive")));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Builds the net, graph and spectrum of one level. Randomness comes from
/// the stream `(seed, level)`.
pub fn build_level(
    cfg: &SweepConfig,
    m: &ManifoldModel<f64>,
    level: usize,
    seed: u64,
) -> Result<LevelArtifacts> {
    let start = Instant::now();
    let eps = cfg.eps_levels[level];
    let rho = cfg.rho(level);
    let mut rng = SeededRng::with_stream(seed, level as u64);
    let net = build_net(m, eps, &mut rng, cfg.oversample)?;
    let graph = build_graph(&net, m, rho)?;
    let k = (cfg.k_target + EXTRA_PAIRS).min(net.len());
    let mut opts = SolverOptions::with_tol(cfg.solver_tol);
    opts.lanczos.seed = rng.next_u64();
    let spectrum = smallest_k_with(&graph, k, &opts)?;
    let runtime_s = start.elapsed().as_secs_f64();
    info!(
        "level {level}: eps {eps}, rho {rho:.4}, N {}, edges {}, {:?} solve, {runtime_s:.1} s",
        net.len(),
        graph.edge_count(),
        spectrum.method
    );
    Ok(LevelArtifacts {
        level,
        eps,
        rho,
        seed,
        net,
        graph,
        spectrum,
        runtime_s,
    })
}

fn level_result(
    cfg: &SweepConfig,
    exact: &ExactSpectrum<f64>,
    level: usize,
    outcome: &Result<LevelArtifacts>,
) -> LevelResult {
    let k = cfg.k_target;
    let lambda_exact: Vec<f64> = exact.eigenvalues.iter().take(k).copied().collect();
    let eps = cfg.eps_levels[level];
    let rho = cfg.rho(level);
    match outcome {
        Ok(a) => {
            let lambda_graph: Vec<f64> = a.spectrum.eigenvalues.iter().take(k).copied().collect();
            let have = lambda_graph.len().min(lambda_exact.len());
            let abs_err: Vec<f64> = (0..have)
                .map(|i| (lambda_graph[i] - lambda_exact[i]).abs())
                .collect();
            let rel_err: Vec<f64> = (0..have)
                .map(|i| {
                    if lambda_exact[i] > 0.0 {
                        abs_err[i] / lambda_exact[i]
                    } else {
                        abs_err[i]
                    }
                })
                .collect();
            let tail = &rel_err[1.min(have)..];
            let mean_rel_err =
                (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64);
            if have < k {
                warn!("level {level}: only {have} eigenpairs for k_target {k}");
            }
            LevelResult {
                level,
                eps,
                rho,
                status: if have == k {
                    LevelStatus::Ok
                } else {
                    LevelStatus::Failed {
                        error: format!("only {have} eigenpairs"),
                    }
                },
                n: a.net.len(),
                edges: a.graph.edge_count(),
                components: a.graph.components(),
                lambda_graph,
                lambda_exact,
                abs_err,
                rel_err,
                mean_rel_err,
                max_residual: Some(a.spectrum.max_residual()),
                runtime_s: a.runtime_s,
            }
        }
        Err(e) => {
            warn!("level {level} failed: {e}");
            LevelResult {
                level,
                eps,
                rho,
                status: LevelStatus::Failed {
                    error: e.to_string(),
                },
                n: 0,
                edges: 0,
                components: 0,
                lambda_graph: Vec::new(),
                lambda_exact,
                abs_err: Vec::new(),
                rel_err: Vec::new(),
                mean_rel_err: None,
                max_residual: None,
                runtime_s: 0.0,
            }
        }
    }
}

/// Runs every level and keeps the per-level artifacts (`None` for failed levels).
pub fn run_sweep_with_artifacts(
    cfg: &SweepConfig,
) -> Result<(ConvergenceReport, Vec<Option<LevelArtifacts>>)> {
    cfg.validate()?;
    let m = cfg.model()?;
    let exact = m.exact_spectrum(cfg.k_target + EXTRA_PAIRS)?;
    let pool = worker_pool()?;
    let outcomes: Vec<Result<LevelArtifacts>> = pool.install(|| {
        (0..cfg.eps_levels.len())
            .into_par_iter()
            .map(|level| build_level(cfg, &m, level, cfg.seed))
            .collect()
    });
    let mut levels: Vec<LevelResult> = outcomes
        .iter()
        .enumerate()
        .map(|(level, o)| level_result(cfg, &exact, level, o))
        .collect();
    levels.sort_by(|a, b| b.scale().total_cmp(&a.scale()).then(a.level.cmp(&b.level)));
    let ok: Vec<&LevelResult> = levels
        .iter()
        .filter(|l| l.is_ok() && l.mean_rel_err.is_some())
        .collect();
    let slope = if ok.len() >= 3 {
        let x: Vec<f64> = ok.iter().map(|l| l.scale()).collect();
        let y: Vec<f64> = ok.iter().map(|l| l.mean_rel_err.unwrap()).collect();
        SlopeFit::fit(&x, &y)
    } else {
        None
    };
    let report = ConvergenceReport {
        manifold: cfg.manifold.clone(),
        rho_rule: cfg.rho_rule,
        k_target: cfg.k_target,
        seed: cfg.seed,
        levels,
        slope,
        alignment: Vec::new(),
    };
    let artifacts = outcomes.into_iter().map(|o| o.ok()).collect();
    Ok((report, artifacts))
}

/// Runs the sweep; with `cfg.output` set, also writes `convergence.json` there.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ConvergenceReport> {
    let report = run_sweep_with_artifacts(cfg)?.0;
    if let Some(dir) = &cfg.output {
        emit_report(&report, ReportFormat::Json, dir)?;
    }
    Ok(report)
}
