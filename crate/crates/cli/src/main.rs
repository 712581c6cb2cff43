use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use laplacenet::harness::sweep::worker_pool;
use laplacenet::harness::{
    alignment_from_artifacts, emit_report, run_lemma_suite, run_sweep_with_artifacts, ReportFormat,
};
use laplacenet::{
    build_graph, build_net, smallest_k_with, verify_net, EpsNet, Lemma, ManifoldModel, NetDump,
    RhoRule, SeededRng, SolverMethod, SolverOptions, SweepConfig,
};

#[derive(Parser)]
#[command(
    name = "laplacenet",
    version,
    about = "Graph approximations of the Laplace-Beltrami operator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an eps-net and write it as JSON.
    Net(NetArgs),
    /// Run a convergence sweep against the exact spectrum.
    Converge(ConvergeArgs),
    /// Smallest eigenpairs of the graph built on a saved net.
    Spectrum(SpectrumArgs),
    /// Align graph eigenvectors with exact eigenfunctions across a sweep.
    Eigenfunctions(EigenfunctionsArgs),
    /// Fitted-constant checks of the transfer-map inequalities.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Args)]
struct NetArgs {
    #[arg(long)]
    manifold: String,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = laplacenet::net::DEFAULT_OVERSAMPLE)]
    oversample: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvergeArgs {
    /// JSON sweep configuration; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifold: Option<String>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// `pow:c,alpha` or `fixed:rho`.
    #[arg(long)]
    rho_rule: Option<RhoRule>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    oversample: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "auto")]
    method: String,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// CSV of eigenvalues; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON dump of eigenvalues and eigenvectors.
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Args)]
struct EigenfunctionsArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    cluster_gap: f64,
    /// Output directory; defaults to the config's output or `.`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnosticsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated lemma names or numbers; all when absent.
    #[arg(long)]
    lemmas: Option<String>,
    /// Seed of the held-out nets; defaults to the sweep seed plus 1000.
    #[arg(long)]
    holdout_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let pool = worker_pool()?;
    pool.install(|| match cli.command {
        Command::Net(a) => net(a),
        Command::Converge(a) => converge(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Eigenfunctions(a) => eigenfunctions(a),
        Command::Diagnostics(a) => diagnostics(a),
    })
}

fn net(a: NetArgs) -> Result<()> {
    let m: ManifoldModel<f64> = a.manifold.parse()?;
    let mut rng = SeededRng::new(a.seed);
    let net = build_net(&m, a.eps, &mut rng, a.oversample)?;
    let report = verify_net(&net, &m, &mut rng, 10_000)?;
    info!(
        "N = {}, largest probe gap {:.4} (eps {}), {} cell radius violations",
        net.len(),
        report.max_gap,
        a.eps,
        report.cell_radius_violations
    );
    net.to_dump(&m, Some(a.seed)).save(&a.out)?;
    println!("{}", a.out.display());
    Ok(())
}

fn sweep_config(a: &ConvergeArgs) -> Result<SweepConfig> {
    let mut cfg = match &a.config {
        Some(p) => SweepConfig::load(p)?,
        None => {
            let (Some(manifold), Some(eps), Some(k)) = (&a.manifold, &a.eps, a.k) else {
                bail!("--manifold, --eps and --k are required without --config");
            };
            SweepConfig::new(
                manifold,
                eps.clone(),
                a.rho_rule.unwrap_or_default(),
                k,
                a.seed.unwrap_or(0),
            )
        }
    };
    if let Some(m) = &a.manifold {
        cfg.manifold = m.clone();
    }
    if let Some(e) = &a.eps {
        cfg.eps_levels = e.clone();
    }
    if let Some(r) = a.rho_rule {
        cfg.rho_rule = r;
    }
    if let Some(k) = a.k {
        cfg.k_target = k;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = a.oversample {
        cfg.oversample = o;
    }
    if let Some(t) = a.tol {
        cfg.solver_tol = t;
    }
    if let Some(o) = &a.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn converge(a: ConvergeArgs) -> Result<()> {
    let cfg = sweep_config(&a)?;
    let (report, _) = run_sweep_with_artifacts(&cfg)?;
    for l in &report.levels {
        match l.mean_rel_err {
            Some(e) if l.is_ok() => println!(
                "level {}: eps {} rho {:.4} N {} mean rel err {:.4e} ({:.1} s)",
                l.level + 1,
                l.eps,
                l.rho,
                l.n,
                e,
                l.runtime_s
            ),
            _ => println!(
                "level {}: eps {} rho {:.4} failed",
                l.level + 1,
                l.eps,
                l.rho
            ),
        }
    }
    if let Some(s) = &report.slope {
        println!("log-log slope {:.3}", s.slope);
    }
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    let path = emit_report(&report, a.format, &dir)?;
    println!("{}", path.display());
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let dump = NetDump::load(&a.net)?;
    let m: ManifoldModel<f64> = dump.manifold.parse()?;
    let net = EpsNet::from_dump(&m, &dump)?;
    let graph = build_graph(&net, &m, a.rho)?;
    let mut opts = SolverOptions::with_tol(a.tol);
    opts.method = match a.method.as_str() {
        "auto" => SolverMethod::Auto,
        "dense" => SolverMethod::Dense,
        "lanczos" => SolverMethod::Lanczos,
        other => bail!("unknown solver method `{other}` (auto, dense, lanczos)"),
    };
    let spec = smallest_k_with(&graph, a.k, &opts)?;
    info!(
        "N = {}, {} edges, {:?} solve, max residual {:.2e}",
        graph.len(),
        graph.edge_count(),
        spec.method,
        spec.max_residual()
    );
    match &a.out {
        Some(p) => write_to(p, |w| spec.write_csv(w))?,
        None => spec.write_csv(io::stdout().lock())?,
    }
    if let Some(p) = &a.vectors {
        spec.to_dump(&dump.hash(), a.rho).save(p)?;
    }
    Ok(())
}

fn eigenfunctions(a: EigenfunctionsArgs) -> Result<()> {
    let cfg = SweepConfig::load(&a.config)?;
    let (mut report, artifacts) = run_sweep_with_artifacts(&cfg)?;
    report.alignment = alignment_from_artifacts(&cfg, &artifacts, a.cluster_gap)?;
    for r in &report.alignment {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
        println!(
            "level {} cluster {} (lambda {}, m {}): delta {:.3} misfit_p {:.4e} misfit_i {} leakage {}{}",
            r.level + 1,
            r.cluster,
            r.lambda,
            r.multiplicity,
            r.delta_lambda,
            r.misfit_p,
            fmt(r.misfit_i),
            fmt(r.leakage.as_ref().map(|l| l.iter().sum())),
            if r.cluster_mismatch.is_some() { " [cluster mismatch]" } else { "" }
        );
    }
    let dir = a.out.or(cfg.output).unwrap_or_else(|| PathBuf::from("."));
    let path = emit_report(&report, ReportFormat::Json, &dir)?;
    println!("{}", path.display());
    Ok(())
}

fn diagnostics(a: DiagnosticsArgs) -> Result<()> {
    let cfg = SweepConfig::load(&a.config)?;
    let lemmas = match &a.lemmas {
        Some(s) => Lemma::parse_list(s)?,
        None => Lemma::ALL.to_vec(),
    };
    let holdout = a.holdout_seed.unwrap_or(cfg.seed.wrapping_add(1000));
    let report = run_lemma_suite(&cfg, &lemmas, None, holdout)?;
    for f in &report.fits {
        println!(
            "{:<24} constant {:.4e} stability {:.3} {} holdout {}",
            f.check.id(),
            f.fitted_constant,
            f.stability_ratio,
            if f.stable { "stable" } else { "UNSTABLE" },
            match f.holdout_worst {
                Some(w) if f.holdout_ok => format!("ok ({w:.3})"),
                Some(w) => format!("VIOLATED ({w:.3})"),
                None => "-".into(),
            }
        );
    }
    if let Some(h) = &report.halving {
        println!(
            "normalizer halving: r {:.4} ratio {:.3} +- {:.3} {}",
            h.r,
            h.ratio,
            h.sigma,
            if h.pass { "ok" } else { "FAILED" }
        );
    }
    let dir = a.out.or(cfg.output).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = dir.join("diagnostics.csv");
    write_to(&csv, |w| report.write_csv(w))?;
    let json = dir.join("diagnostics.json");
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(&json, text).with_context(|| format!("writing {}", json.display()))?;
    println!("{}", csv.display());
    Ok(())
}

fn write_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
