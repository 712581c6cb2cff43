//! Acceptance criteria for the whole pipeline, each printed as one PASS/FAIL
//! line with its measurements indented below it.

use std::time::Instant;

use laplacenet::harness::{
    alignment_from_artifacts, run_lemma_suite, run_sweep_with_artifacts, ConvergenceReport,
    LevelArtifacts,
};
use laplacenet::{
    build_graph, build_net, cluster_eigenvalues, discretize_p, lift_pstar, smallest_k,
    smallest_k_with, Graph, GraphFunction, Lemma, Manifold, Net, RhoRule, SampledFunction,
    SeededRng, SolverMethod, SolverOptions, SweepConfig,
};

/// Finest-level mean relative error of the pilot runs (seed 7).
const SPHERE_BASELINE: f64 = 0.04730174184444591;
const TORUS_BASELINE: f64 = 0.1337637975135802;
/// Finest-level Procrustes misfits of the sphere's lambda = 2 cluster in the pilot run.
const MISFIT_P_BASELINE: f64 = 0.001337474804175738;
const MISFIT_I_BASELINE: f64 = 0.0008305075087828712;

const BASELINE_FACTOR: f64 = 1.25;
const ALIGNMENT_SLACK: f64 = 1.2;
const MIN_SLOPE: f64 = 0.5;

fn sphere() -> Manifold {
    Manifold::sphere2(1.0).unwrap()
}

fn net_and_graph(m: &Manifold, eps: f64, rho: f64, seed: u64, oversample: usize) -> (Net, Graph) {
    let net = build_net(m, eps, &mut SeededRng::new(seed), oversample).unwrap();
    let graph = build_graph(&net, m, rho).unwrap();
    (net, graph)
}

fn random_function(n: usize, rng: &mut SeededRng) -> GraphFunction<f64> {
    GraphFunction((0..n).map(|_| rng.normal::<f64>()).collect())
}

fn rel_diff(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.details
            .push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
        self.pass &= ok;
    }

    fn note(&mut self, what: impl Into<String>) {
        self.details.push(format!("     {}", what.into()));
    }
}

fn report(n: usize, name: &str, budget_s: f64, f: impl FnOnce(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut out = Outcome::new();
    f(&mut out);
    let secs = start.elapsed().as_secs_f64();
    out.check(
        secs <= budget_s,
        format!("runtime {secs:.1} s (budget {budget_s} s)"),
    );
    println!(
        "criterion {n}: {} {name}",
        if out.pass { "PASS" } else { "FAIL" }
    );
    for d in &out.details {
        println!("    {d}");
    }
    out.pass
}

fn sweep_config(manifold: &str, k: usize) -> SweepConfig {
    SweepConfig::new(
        manifold,
        vec![0.25, 0.18, 0.12, 0.08],
        RhoRule::PowerLaw { c: 1.0, alpha: 0.5 },
        k,
        7,
    )
}

type Sweep = (ConvergenceReport, Vec<Option<LevelArtifacts>>);

fn identities(out: &mut Outcome) {
    let m = sphere();
    let (net, g) = net_and_graph(&m, 0.16, 0.4, 11, 200);
    out.note(format!("sphere net N = {}", net.len()));
    let q = &net.quadrature;
    let mut rng = SeededRng::new(1);
    let mut worst = [0.0f64; 5];
    for _ in 0..100 {
        let u = random_function(net.len(), &mut rng);
        let v = random_function(net.len(), &mut rng);
        let f = SampledFunction((0..q.len()).map(|_| rng.normal::<f64>()).collect());
        let lu = g.apply_laplacian(&u).unwrap();
        let lv = g.apply_laplacian(&v).unwrap();
        let e = g.dirichlet_energy(&u).unwrap();
        worst[0] = worst[0].max(rel_diff(e, g.graph_inner(&lu, &u).unwrap(), e));
        let scale = g.graph_norm(&lu).unwrap() * g.graph_norm(&v).unwrap();
        let sym = rel_diff(
            g.graph_inner(&lu, &v).unwrap(),
            g.graph_inner(&u, &lv).unwrap(),
            scale,
        );
        worst[1] = worst[1].max(sym);
        let lifted = lift_pstar(&net, &u).unwrap();
        let nu = g.graph_norm(&u).unwrap();
        worst[2] = worst[2].max(rel_diff(lifted.l2_norm(q), nu, nu));
        let pf = discretize_p(&net, &f).unwrap();
        let adj = rel_diff(
            g.graph_inner(&pf, &u).unwrap(),
            f.inner(&lifted, q),
            f.l2_norm(q) * nu,
        );
        worst[3] = worst[3].max(adj);
        let back = discretize_p(&net, &lifted).unwrap();
        let top = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let id = back
            .iter()
            .zip(u.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / top;
        worst[4] = worst[4].max(id);
    }
    let names = [
        "Rayleigh identity",
        "self-adjointness",
        "P* norm",
        "P/P* adjointness",
        "P P* = id",
    ];
    for (name, w) in names.iter().zip(worst) {
        out.check(
            w <= 1e-12,
            format!("{name}: worst relative error {w:.2e} (limit 1e-12)"),
        );
    }
}

fn kernel(out: &mut Outcome) {
    let m = sphere();
    let (_, g) = net_and_graph(&m, 0.16, 0.4, 14, 200);
    out.check(g.is_connected(), "graph is connected");
    let s = smallest_k(&g, 3, 1e-11).unwrap();
    let (l1, l2) = (s.eigenvalues[0], s.eigenvalues[1]);
    out.check(
        l1.abs() <= 1e-10 * l2,
        format!("lambda_1 = {l1:.2e}, lambda_2 = {l2:.4}"),
    );
    let c = 1.0 / m.volume().sqrt();
    let sign = s.eigenvectors[0][0].signum();
    let dev = s.eigenvectors[0]
        .iter()
        .map(|x| (sign * x - c).abs())
        .fold(0.0, f64::max);
    out.check(
        dev <= 1e-8,
        format!("constant eigenvector off 1/sqrt(vol) by {dev:.2e} (limit 1e-8)"),
    );
}

fn random_graph(rng: &mut SeededRng, n: usize) -> Graph {
    let mu: Vec<f64> = (0..n).map(|_| 0.1 + rng.unit::<f64>()).collect();
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.index(i), i, 0.05 + rng.unit::<f64>()));
    }
    for _ in 0..2 * n {
        let (i, j) = (rng.index(n), rng.index(n));
        if i != j
            && !edges
                .iter()
                .any(|&(a, b, _)| (a, b) == (i, j) || (a, b) == (j, i))
        {
            edges.push((i, j, 0.05 + rng.unit::<f64>()));
        }
    }
    Graph::with_weights(mu, &edges)
}

fn solvers(out: &mut Outcome) {
    let mut rng = SeededRng::new(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 8 + rng.index(33);
        let g = random_graph(&mut rng, n);
        let k = n / 2;
        let mut opts = SolverOptions::with_tol(1e-12);
        opts.method = SolverMethod::Dense;
        let d = smallest_k_with(&g, k, &opts).unwrap();
        opts.method = SolverMethod::Lanczos;
        let l = smallest_k_with(&g, k, &opts).unwrap();
        for (a, b) in d.eigenvalues.iter().zip(&l.eigenvalues) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    out.check(
        worst <= 1e-9,
        format!("20 graphs, worst difference {worst:.2e} (limit 1e-9 max(|lambda|, 1))"),
    );
}

fn convergence(out: &mut Outcome, sweep: &Sweep, baseline: f64) {
    let report = &sweep.0;
    let mut errs = Vec::new();
    for l in &report.levels {
        match l.mean_rel_err {
            Some(e) if l.is_ok() => {
                out.note(format!(
                    "eps {} rho {:.4} N {} mean rel err {e:.4e} ({:.1} s)",
                    l.eps, l.rho, l.n, l.runtime_s
                ));
                errs.push(e);
            }
            _ => out.note(format!("eps {} failed", l.eps)),
        }
    }
    out.check(errs.len() == report.levels.len(), "every level succeeded");
    let rising = errs.windows(2).filter(|w| w[1] >= w[0]).count();
    let decays = errs.len() >= 2 && errs[errs.len() - 1] < errs[0];
    out.check(
        decays && rising <= 1,
        format!("(a) finest below coarsest: {decays}, non-monotone adjacent pairs: {rising} (at most 1)"),
    );
    if let Some(&last) = errs.last() {
        let limit = baseline * BASELINE_FACTOR;
        out.check(
            last <= limit,
            format!("(b) finest error {last:.4e} (limit {limit:.4e})"),
        );
    }
    match &report.slope {
        Some(s) => out.check(
            s.slope >= MIN_SLOPE,
            format!("(c) log-log slope {:.3} (at least {MIN_SLOPE})", s.slope),
        ),
        None => out.check(false, "(c) no slope fitted"),
    }
}

fn multiplicity(out: &mut Outcome, sweep: &Sweep) {
    let finest = sweep
        .1
        .iter()
        .flatten()
        .max_by(|a, b| b.eps.total_cmp(&a.eps));
    let Some(finest) = finest else {
        out.check(false, "finest level missing");
        return;
    };
    let ev = &finest.spectrum.eigenvalues;
    let triple = &ev[1..4];
    let mean = triple.iter().sum::<f64>() / 3.0;
    let spread = (triple[2] - triple[0]) / mean;
    out.check(
        spread <= 0.1,
        format!(
            "lambda = 2 triple {triple:.4?}: spread {:.2}% of mean (limit 10%)",
            100.0 * spread
        ),
    );
    let sizes: Vec<usize> = cluster_eigenvalues(&ev[..9], 0.1)
        .iter()
        .map(|r| r.len())
        .collect();
    out.check(
        sizes == [1, 3, 5],
        format!("cluster sizes {sizes:?} (expected [1, 3, 5])"),
    );
}

fn alignment(out: &mut Outcome, cfg: &SweepConfig, sweep: &Sweep) {
    let records = alignment_from_artifacts(cfg, &sweep.1, 0.1).unwrap();
    let mut cluster: Vec<_> = records.iter().filter(|r| r.lambda == 2.0).collect();
    cluster.sort_by_key(|r| r.level);
    out.check(
        cluster.len() == cfg.eps_levels.len(),
        format!("{} levels aligned", cluster.len()),
    );
    for r in &cluster {
        let mi = r.misfit_i.map_or("-".into(), |v| format!("{v:.4e}"));
        out.note(format!(
            "eps {}: misfit_p {:.4e} misfit_i {mi}",
            r.eps, r.misfit_p
        ));
        if let Some(m) = &r.cluster_mismatch {
            out.note(m.clone());
        }
    }
    let series = [
        (
            "misfit_p",
            cluster.iter().map(|r| Some(r.misfit_p)).collect::<Vec<_>>(),
            MISFIT_P_BASELINE,
        ),
        (
            "misfit_i",
            cluster.iter().map(|r| r.misfit_i).collect(),
            MISFIT_I_BASELINE,
        ),
    ];
    for (name, values, baseline) in series {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let bad = v
            .windows(2)
            .filter(|w| w[1] > ALIGNMENT_SLACK * w[0])
            .count();
        out.check(
            v.len() >= 2 && bad == 0,
            format!(
                "{name} decreases over {} levels within 20% per step ({bad} violations)",
                v.len()
            ),
        );
        if let Some(&last) = v.last() {
            let limit = baseline * BASELINE_FACTOR;
            out.check(
                last <= limit,
                format!("{name} finest {last:.4e} (limit {limit:.4e})"),
            );
        }
    }
}

fn lemmas(out: &mut Outcome, cfg: &SweepConfig, sweep: &Sweep) {
    let holdout = cfg.seed + 1000;
    let suite = run_lemma_suite(cfg, &Lemma::ALL, Some(&sweep.1), holdout).unwrap();
    for f in &suite.fits {
        out.check(
            f.stable,
            format!(
                "{}: constant {:.4e}, stability ratio {:.3} (limit 1.5)",
                f.check.id(),
                f.fitted_constant,
                f.stability_ratio
            ),
        );
        match f.holdout_worst {
            Some(w) => out.check(
                f.holdout_ok,
                format!(
                    "{}: held-out seed {holdout}, worst ratio {w:.3} (limit 1)",
                    f.check.id()
                ),
            ),
            None => out.check(false, format!("{}: no held-out measurement", f.check.id())),
        }
    }
    match &suite.halving {
        Some(h) => out.check(
            h.pass,
            format!(
                "normalizer halving at r = {:.4}: ratio {:.3} +- {:.3} (expected in [0.25, 1])",
                h.r, h.ratio, h.sigma
            ),
        ),
        None => out.check(false, "normalizer halving not measured"),
    }
}

fn scaling(out: &mut Outcome) {
    let m = sphere();
    let (_, g) = net_and_graph(&m, 0.16, 0.4, 13, 200);
    let scaled = g.with_scaled_measure(3.0);
    let a = smallest_k(&g, 10, 1e-12).unwrap();
    let b = smallest_k(&scaled, 10, 1e-12).unwrap();
    let worst = (1..10)
        .map(|k| {
            rel_diff(
                b.eigenvalues[k],
                3.0 * a.eigenvalues[k],
                3.0 * a.eigenvalues[k],
            )
        })
        .fold(0.0, f64::max);
    out.check(
        worst <= 1e-10,
        format!("lambda_2..lambda_10 scale by 3 within {worst:.2e} relative (limit 1e-10)"),
    );
    let d1 = (b.eigenvalues[0] - 3.0 * a.eigenvalues[0]).abs();
    out.check(
        d1 <= 1e-10,
        format!("lambda_1 off by {d1:.2e} absolute (limit 1e-10)"),
    );
}

/// Runs every criterion in order and returns whether all passed.
pub fn run_all() -> bool {
    let mut all = true;
    all &= report(1, "algebraic identities", 10.0, identities);
    all &= report(2, "kernel of the Laplacian", 5.0, kernel);
    all &= report(3, "dense and Lanczos solvers agree", 10.0, solvers);

    let sphere_cfg = sweep_config("sphere2:1", 10);
    let mut sphere_sweep = None;
    all &= report(4, "sphere convergence", 600.0, |out| {
        let sweep = run_sweep_with_artifacts(&sphere_cfg).unwrap();
        convergence(out, &sweep, SPHERE_BASELINE);
        sphere_sweep = Some(sweep);
    });
    let sphere_sweep = sphere_sweep.unwrap();

    all &= report(5, "torus convergence", 600.0, |out| {
        let cfg = sweep_config("torus2:6.283185307179586,6.283185307179586", 9);
        let sweep = run_sweep_with_artifacts(&cfg).unwrap();
        convergence(out, &sweep, TORUS_BASELINE);
    });
    all &= report(6, "multiplicity clustering", 5.0, |out| {
        multiplicity(out, &sphere_sweep)
    });
    all &= report(7, "eigenfunction alignment", 300.0, |out| {
        alignment(out, &sphere_cfg, &sphere_sweep)
    });
    all &= report(8, "lemma-family inequalities", 900.0, |out| {
        lemmas(out, &sphere_cfg, &sphere_sweep)
    });
    all &= report(9, "measure-scaling covariance", 10.0, scaling);
    all &= report(10, "determinism", 600.0, |out| {
        let again = run_sweep_with_artifacts(&sphere_cfg).unwrap().0;
        let (a, b) = (sphere_sweep.0.to_csv_string(), again.to_csv_string());
        out.check(
            a == b,
            format!("repeated sphere sweep CSV identical ({} bytes)", a.len()),
        );
    });

    println!(
        "acceptance: {}",
        if all {
            "all criteria passed"
        } else {
            "some criteria FAILED"
        }
    );
    all
}
