mod common;

use common::{net_and_graph, torus};
use laplacenet::harness::{
    alignment_experiment, emit_report, run_sweep_with_artifacts, LevelStatus, ReportFormat,
};
use laplacenet::{
    cluster_eigenvalues, discretize_p, run_sweep, smallest_k_with, spectral_projection,
    ConvergenceReport, Lemma, ModeLabel, RhoRule, SampledFunction, SolverMethod, SolverOptions,
    SweepConfig,
};

fn small_sphere_sweep(k: usize) -> SweepConfig {
    let mut cfg = SweepConfig::new("sphere2:1", vec![0.3, 0.22, 0.16], RhoRule::default(), k, 3);
    cfg.oversample = 100;
    cfg
}

#[test]
fn csv_has_a_row_per_level_and_eigenvalue() {
    let cfg = small_sphere_sweep(6);
    let report = run_sweep(&cfg).unwrap();
    assert_eq!(report.levels.len(), 3);
    let csv = report.to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,eps,rho,N,edges,k,lambda_graph,lambda_exact,abs_err,rel_err,status"
    );
    assert_eq!(lines.count(), 3 * 6);
    let scales: Vec<f64> = report.levels.iter().map(|l| l.scale()).collect();
    assert!(scales.windows(2).all(|w| w[0] >= w[1]));
    assert!(report.slope.is_some());
}

#[test]
fn a_failed_level_is_reported_not_dropped() {
    // The coarsest circle net has fewer points than the eigenpairs requested.
    let cfg = SweepConfig::new("circle:1", vec![0.5, 0.1, 0.05], RhoRule::default(), 10, 1);
    let report = run_sweep(&cfg).unwrap();
    assert_eq!(report.levels.len(), 3);
    let failed: Vec<_> = report.levels.iter().filter(|l| !l.is_ok()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].eps, 0.5);
    assert!(matches!(failed[0].status, LevelStatus::Failed { .. }));
    assert_eq!(report.successful().count(), 2);
    // Two successful levels are too few for a slope.
    assert!(report.slope.is_none());
    let csv = report.to_csv_string();
    assert_eq!(csv.lines().count(), 1 + 3 * 10);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",failed")).count(), 10);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",ok")).count(), 20);
}

#[test]
fn json_report_round_trips() {
    let cfg = small_sphere_sweep(4);
    let report = run_sweep(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = emit_report(&report, ReportFormat::Json, dir.path()).unwrap();
    let back = ConvergenceReport::load_json(&path).unwrap();
    assert_eq!(back, report);
    let csv = emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
    assert_eq!(
        std::fs::read_to_string(csv).unwrap(),
        report.to_csv_string()
    );

    let mut persisted = cfg.clone();
    persisted.output = Some(dir.path().join("persisted"));
    run_sweep(&persisted).unwrap();
    assert!(dir.path().join("persisted/convergence.json").exists());
}

#[test]
fn the_constant_mode_is_exact() {
    let report = run_sweep(&small_sphere_sweep(1)).unwrap();
    for l in &report.levels {
        assert!(l.is_ok());
        assert!(l.abs_err[0] <= 1e-8, "level {}: {}", l.level, l.abs_err[0]);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_sphere_sweep(4);
    cfg.eps_levels.clear();
    assert!(cfg.validate().is_err());
    assert!(run_sweep(&cfg).is_err());
    let cfg = SweepConfig::new("sphere2:1", vec![0.1, 0.2], RhoRule::default(), 4, 0);
    assert!(cfg.validate().is_err());
    let cfg = SweepConfig::new("sphere2:1", vec![0.3], RhoRule::Fixed { rho: 0.2 }, 4, 0);
    assert!(cfg.validate().is_err());
    let cfg = SweepConfig::new(
        "sphere2:1",
        vec![0.3],
        RhoRule::PowerLaw { c: 1.0, alpha: 1.5 },
        4,
        0,
    );
    assert!(cfg.validate().is_err());
    assert!("pow:1".parse::<RhoRule>().is_err());
    assert_eq!(
        "fixed:0.5".parse::<RhoRule>().unwrap(),
        RhoRule::Fixed { rho: 0.5 }
    );
}

#[test]
fn sweeps_are_deterministic() {
    let cfg = small_sphere_sweep(5);
    let a = run_sweep(&cfg).unwrap().to_csv_string();
    let b = run_sweep(&cfg).unwrap().to_csv_string();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a, run_sweep(&other).unwrap().to_csv_string());
}

#[test]
fn torus_constant_cluster_aligns_exactly() {
    let mut cfg = SweepConfig::new(
        "torus2:6.283185307179586,6.283185307179586",
        vec![0.3, 0.25],
        RhoRule::default(),
        5,
        2,
    );
    cfg.oversample = 50;
    let records = alignment_experiment(&cfg, 0.1).unwrap();
    let zero: Vec<_> = records.iter().filter(|r| r.cluster == 0).collect();
    assert_eq!(zero.len(), 2);
    for r in zero {
        assert_eq!(r.multiplicity, 1);
        assert!(r.misfit_p <= 1e-8, "{}", r.misfit_p);
        if let Some(mi) = r.misfit_i {
            assert!(mi <= 1e-8, "{mi}");
        }
    }
}

#[test]
fn a_window_over_the_whole_spectrum_has_no_leakage() {
    let m = torus();
    let (net, graph) = net_and_graph(&m, 0.6, 1.0, 9, 50);
    let mut opts = SolverOptions::with_tol(1e-12);
    opts.method = SolverMethod::Dense;
    let spec = smallest_k_with(&graph, graph.len(), &opts).unwrap();
    let top = spec.eigenvalues[spec.len() - 1];
    let label = ModeLabel::Torus {
        p: 1,
        q: 2,
        x: laplacenet::Trig::Cos,
        y: laplacenet::Trig::Sin,
    };
    let f = SampledFunction::eigenfunction(&m, &net.quadrature, label).unwrap();
    let pf = discretize_p(&net, &f).unwrap();
    let proj = spectral_projection(&graph, &spec, &pf, -1.0, top + 1.0).unwrap();
    let diff = laplacenet::GraphFunction(pf.iter().zip(proj.iter()).map(|(a, b)| a - b).collect());
    assert!(graph.graph_norm(&diff).unwrap().powi(2) <= 1e-10);
}

/// Smallest `s` with `|l_G - l| <= s (l + l^{3/2})` for every nonzero exact
/// eigenvalue of the level, divided by `eps/rho + rho`.
fn sandwich_multiplier(l: &laplacenet::harness::LevelResult) -> f64 {
    l.lambda_graph
        .iter()
        .zip(&l.lambda_exact)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&g, &e)| (g - e).abs() / (l.scale() * (e + e.powf(1.5))))
        .fold(0.0, f64::max)
}

#[test]
fn sphere_spectra_sit_in_a_stable_sandwich() {
    let cfg = SweepConfig::new(
        "sphere2:1",
        vec![0.25, 0.18, 0.12, 0.08],
        RhoRule::default(),
        10,
        7,
    );
    let (report, artifacts) = run_sweep_with_artifacts(&cfg).unwrap();
    let c: Vec<f64> = report.levels.iter().map(sandwich_multiplier).collect();
    let (a, b) = (c[c.len() - 2], c[c.len() - 1]);
    assert!(a.max(b) / a.min(b) <= 1.5, "multipliers {c:?}");
    for (l, &s) in report.levels.iter().zip(&c) {
        let s = s * l.scale();
        for (&g, &e) in l.lambda_graph.iter().zip(&l.lambda_exact) {
            let slack = s * e.powf(1.5);
            assert!(g >= (1.0 - s) * e - slack - 1e-12 && g <= (1.0 + s) * e + slack + 1e-12);
        }
    }
    // Multiplicities 1, 3, 5 of the first nine exact eigenvalues survive.
    let finest = artifacts.last().unwrap().as_ref().unwrap();
    let sizes: Vec<usize> = cluster_eigenvalues(&finest.spectrum.eigenvalues[..9], 0.1)
        .iter()
        .map(|r| r.len())
        .collect();
    assert_eq!(sizes, vec![1, 3, 5]);
}

#[test]
fn lemma_names_and_numbers_parse() {
    assert_eq!("2.4".parse::<Lemma>().unwrap(), Lemma::Dispersion);
    assert_eq!("cell-average".parse::<Lemma>().unwrap(), Lemma::CellAverage);
    let all = Lemma::parse_list("6.1, 2.4,3.4,4.3,5.2,4.6,2.4").unwrap();
    assert_eq!(all, Lemma::ALL.to_vec());
    assert!(Lemma::parse_list("2.4,7.7").is_err());
    assert!(Lemma::ALL.iter().all(|l| !l.checks().is_empty()));
}
