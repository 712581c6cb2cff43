mod common;

use common::{net_and_graph, random_function, rel_diff, sphere, torus};
use laplacenet::harness::diagnostics::normalizer_statistic;
use laplacenet::{
    average_dispersion, build_net, discretize_p, lift_pstar, smallest_k, KernelSmoother, ModeLabel,
    SampledFunction, SeededRng, TransferContext,
};

/// Exact `theta` on the unit sphere: the kernel integrated in geodesic polar
/// coordinates, `(4 / r^2) int_0^r (1 - t^2/r^2) sin t dt`, by Simpson's rule.
fn sphere_theta(r: f64) -> f64 {
    let n = 20_000;
    let h = r / n as f64;
    let g = |t: f64| (1.0 - t * t / (r * r)) * t.sin();
    let mut acc = g(0.0) + g(r);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    4.0 / (r * r) * acc * h / 3.0
}

#[test]
fn sphere_normalizer_matches_radial_integral() {
    let m = sphere();
    let net = build_net(&m, 0.08, &mut SeededRng::new(21), 200).unwrap();
    let r = 0.1;
    let exact = sphere_theta(r);
    assert!((exact - (1.0 - r * r / 18.0)).abs() < 1e-5);
    let (mean, se) = normalizer_statistic(&m, &net, r, 2_000_000, 5).unwrap();
    assert!(
        (mean - exact).abs() <= 3.0 * se,
        "mean {mean} vs {exact} (se {se})"
    );

    let smoother = KernelSmoother::new(&m, &net.quadrature, r).unwrap();
    let probes = m.uniform_sample(&mut SeededRng::new(8), 500).unwrap();
    let theta = smoother.theta_at(&probes);
    assert!(theta.iter().all(|t| (t - 1.0).abs() <= 0.5));
    let dev = theta.iter().map(|t| (t - 1.0).abs()).sum::<f64>() / theta.len() as f64;
    assert!(dev <= 0.5);
}

#[test]
fn flat_torus_normalizer_is_one() {
    let m = torus();
    let net = build_net(&m, 0.15, &mut SeededRng::new(4), 200).unwrap();
    for r in [0.2, 0.4] {
        let (mean, se) = normalizer_statistic(&m, &net, r, 2_000_000, 9).unwrap();
        assert!(
            (mean - 1.0).abs() <= 3.0 * se,
            "r {r}: mean {mean} (se {se})"
        );
    }
}

#[test]
fn kernel_support_and_peak() {
    let m = sphere();
    let net = build_net(&m, 0.2, &mut SeededRng::new(2), 50).unwrap();
    let q = &net.quadrature;
    let r = 0.3;
    let smoother = KernelSmoother::new(&m, q, r).unwrap();
    let peak = 4.0 / (2.0 * std::f64::consts::PI * r * r);
    assert!(smoother.kernel_peak() <= peak + 1e-12);
    let x = q.samples[0];
    assert!(q
        .samples
        .iter()
        .all(|s| smoother.kernel(m.distance(&x, s)) <= peak + 1e-12));
    // Zero inside B_r(x), one outside.
    let f = SampledFunction::from_fn(q, |y| if m.distance(&x, y) < r { 0.0 } else { 1.0 });
    assert_eq!(smoother.lambda0(&f, &[x]).unwrap(), vec![0.0]);
    assert!(KernelSmoother::new(&m, q, 2.0).is_err());
}

#[test]
fn dispersion_is_quadratic_and_vanishes_on_constants() {
    let m = sphere();
    let net = build_net(&m, 0.2, &mut SeededRng::new(6), 50).unwrap();
    let q = &net.quadrature;
    let one = SampledFunction::constant(q, 3.0);
    assert_eq!(
        average_dispersion(&m, q, &one, 0.3, 1_000_000, 1)
            .unwrap()
            .value,
        0.0
    );
    let f = SampledFunction::eigenfunction(&m, q, ModeLabel::Sphere { l: 2, m: 1 }).unwrap();
    let e = average_dispersion(&m, q, &f, 0.3, 1_000_000, 1).unwrap();
    let e3 = average_dispersion(&m, q, &f.scaled(3.0), 0.3, 1_000_000, 1).unwrap();
    assert!(rel_diff(e3.value, 9.0 * e.value, e3.value) < 1e-12);
    assert!(e.pairs > 0 && e.outer_samples <= q.len());
}

#[test]
fn cell_energy_is_bounded_by_wider_dispersion() {
    // Jensen on each pair of cells: pairs of samples from cells whose centers
    // are closer than rho are closer than rho + 2 eps.
    let m = sphere();
    let (eps, rho) = (0.2, 0.5);
    let (net, graph) = net_and_graph(&m, eps, rho, 13, 20);
    assert!(net.covering_radius <= eps);
    let q = &net.quadrature;
    let scale = 4.0 / (std::f64::consts::PI * rho.powi(4));
    let mut rng = SeededRng::new(40);
    for label in [
        ModeLabel::Sphere { l: 1, m: 0 },
        ModeLabel::Sphere { l: 3, m: -2 },
    ] {
        let f = SampledFunction::eigenfunction(&m, q, label).unwrap();
        let noisy = SampledFunction(f.iter().map(|v| v + 0.3 * rng.normal::<f64>()).collect());
        for g in [f, noisy] {
            let lhs = graph
                .dirichlet_energy(&discretize_p(&net, &g).unwrap())
                .unwrap();
            let wide = (rho + 2.0 * eps) * (1.0 + 1e-9);
            let e = average_dispersion(&m, q, &g, wide, usize::MAX, 0).unwrap();
            assert_eq!(e.outer_samples, q.len());
            assert!(
                lhs <= scale * e.value * (1.0 + 1e-12),
                "{lhs} > {}",
                scale * e.value
            );
        }
    }
}

#[test]
fn cell_average_error_shrinks_with_eps() {
    let m = sphere();
    let mut prev = f64::INFINITY;
    for (level, eps) in [0.25, 0.18, 0.12, 0.08].into_iter().enumerate() {
        let net = build_net(&m, eps, &mut SeededRng::with_stream(7, level as u64), 100).unwrap();
        let q = &net.quadrature;
        let f = SampledFunction::eigenfunction(&m, q, ModeLabel::Sphere { l: 2, m: 0 }).unwrap();
        let back = lift_pstar(&net, &discretize_p(&net, &f).unwrap()).unwrap();
        let err = f.sub(&back).l2_norm(q);
        assert!(err <= 1.1 * prev, "eps {eps}: {err} after {prev}");
        prev = err;
    }
}

#[test]
fn discretization_is_linear_and_reproduces_cell_sums() {
    let m = sphere();
    let net = build_net(&m, 0.2, &mut SeededRng::new(17), 50).unwrap();
    let q = &net.quadrature;
    let mut rng = SeededRng::new(3);
    let g = SampledFunction((0..q.len()).map(|_| rng.normal::<f64>()).collect());
    let pg = discretize_p(&net, &g).unwrap();
    let pcg = discretize_p(&net, &g.scaled(-2.5)).unwrap();
    for (a, b) in pcg.iter().zip(pg.iter()) {
        assert!((a + 2.5 * b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let one = discretize_p(&net, &SampledFunction::constant(q, 1.0)).unwrap();
    assert!(one.iter().all(|&v| (v - 1.0).abs() < 1e-14));

    // Direct summation over cells.
    let f = SampledFunction::eigenfunction(&m, q, ModeLabel::Sphere { l: 1, m: 1 }).unwrap();
    let pf = discretize_p(&net, &f).unwrap();
    let mut sums = vec![0.0; net.len()];
    for (s, &c) in q.cell_of_sample.iter().enumerate() {
        sums[c as usize] += q.weight * f[s];
    }
    let direct: f64 = sums
        .iter()
        .zip(&net.mu)
        .map(|(s, mu)| s * s / mu)
        .sum::<f64>()
        .sqrt();
    let norm: f64 = pf
        .iter()
        .zip(&net.mu)
        .map(|(v, mu)| mu * v * v)
        .sum::<f64>()
        .sqrt();
    assert!(rel_diff(norm, direct, direct) < 1e-12);
}

#[test]
fn interpolation_keeps_constants_and_bounds_eigenvectors() {
    let m = sphere();
    let (eps, rho) = (0.12, 0.3464);
    let (net, graph) = net_and_graph(&m, eps, rho, 7, 100);
    let ctx = TransferContext::for_interpolation(&m, &net, rho).unwrap();
    let one = ctx
        .interpolate_i(&laplacenet::GraphFunction::constant(net.len(), 1.0))
        .unwrap();
    assert!(one.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    let spec = smallest_k(&graph, 6, 1e-10).unwrap();
    for u in &spec.eigenvectors[1..] {
        let iu = ctx.interpolate_i(u).unwrap();
        assert!(iu.l2_norm(&net.quadrature) <= 2.0 * graph.graph_norm(u).unwrap());
    }
    let mut rng = SeededRng::new(1);
    let a = random_function(net.len(), &mut rng);
    let b = random_function(net.len(), &mut rng);
    let sum = laplacenet::GraphFunction(a.iter().zip(b.iter()).map(|(x, y)| x + 2.0 * y).collect());
    let lhs = ctx.interpolate_i(&sum).unwrap();
    let (ia, ib) = (
        ctx.interpolate_i(&a).unwrap(),
        ctx.interpolate_i(&b).unwrap(),
    );
    for s in 0..lhs.len() {
        assert!((lhs[s] - ia[s] - 2.0 * ib[s]).abs() < 1e-10);
    }
    assert!(TransferContext::for_interpolation(&m, &net, 2.0 * eps).is_err());
}
