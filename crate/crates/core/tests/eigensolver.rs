mod common;

use common::{net_and_graph, sphere};
use laplacenet::{
    cluster_eigenvalues, smallest_k_with, spectral_projection, Error, Graph, GraphFunction,
    SeededRng, SolverMethod, SolverOptions,
};
use proptest::prelude::*;

fn random_graph(rng: &mut SeededRng, n: usize) -> Graph {
    let mu: Vec<f64> = (0..n).map(|_| 0.1 + rng.unit::<f64>()).collect();
    let mut edges = Vec::new();
    // A spanning path keeps most graphs connected; extra random edges on top.
    for i in 1..n {
        if rng.unit::<f64>() < 0.9 {
            edges.push((rng.index(i), i, 0.05 + rng.unit::<f64>()));
        }
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

fn solve(g: &Graph, k: usize, method: SolverMethod, tol: f64) -> laplacenet::Spectrum {
    let mut opts = SolverOptions::with_tol(tol);
    opts.method = method;
    smallest_k_with(g, k, &opts).unwrap()
}

#[test]
fn dense_and_lanczos_agree_on_random_graphs() {
    let mut rng = SeededRng::new(99);
    for trial in 0..20 {
        let n = 8 + rng.index(33);
        let g = random_graph(&mut rng, n);
        let k = (n / 2).max(1);
        let d = solve(&g, k, SolverMethod::Dense, 1e-12);
        let l = solve(&g, k, SolverMethod::Lanczos, 1e-12);
        for (a, b) in d.eigenvalues.iter().zip(&l.eigenvalues) {
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                "trial {trial}: {a} vs {b}"
            );
        }
        assert!(l.mu_gram_error < 1e-10);
    }
}

#[test]
fn small_basis_forces_restarts() {
    let m = sphere();
    let (_, g) = net_and_graph(&m, 0.16, 0.4, 21, 100);
    let dense = solve(&g, 10, SolverMethod::Dense, 1e-11);
    let mut opts = SolverOptions::with_tol(1e-11);
    opts.method = SolverMethod::Lanczos;
    opts.lanczos.max_dim = Some(16);
    let l = smallest_k_with(&g, 10, &opts).unwrap();
    for (a, b) in dense.eigenvalues.iter().zip(&l.eigenvalues) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
    assert!(l.max_residual() < 1e-9 * l.eigenvalues[9]);
    opts.lanczos.max_restarts = 0;
    assert!(matches!(
        smallest_k_with(&g, 10, &opts),
        Err(Error::NoConvergence { .. })
    ));
}

#[test]
fn repeated_eigenvalues_are_all_found() {
    // Two identical disjoint triangles: every eigenvalue is doubled.
    let edges = [
        (0, 1, 1.0),
        (1, 2, 1.0),
        (0, 2, 1.0),
        (3, 4, 1.0),
        (4, 5, 1.0),
        (3, 5, 1.0),
    ];
    let g = Graph::with_weights(vec![1.0; 6], &edges);
    let l = solve(&g, 4, SolverMethod::Lanczos, 1e-12);
    let expect = [0.0, 0.0, 3.0, 3.0];
    for (a, b) in l.eigenvalues.iter().zip(expect) {
        assert!((a - b).abs() < 1e-10, "{:?}", l.eigenvalues);
    }
}

#[test]
fn k_larger_than_n_is_rejected() {
    let g = Graph::with_weights(vec![1.0; 3], &[(0, 1, 1.0), (1, 2, 1.0)]);
    assert!(matches!(solve_err(&g, 4), Error::KTooLarge { k: 4, n: 3 }));
    assert!(matches!(solve_err(&g, 0), Error::KTooLarge { .. }));
}

fn solve_err(g: &Graph, k: usize) -> Error {
    smallest_k_with(g, k, &SolverOptions::default()).unwrap_err()
}

#[test]
fn projection_over_the_full_spectrum_is_the_identity() {
    let mut rng = SeededRng::new(5);
    let g = random_graph(&mut rng, 30);
    let s = solve(&g, 30, SolverMethod::Dense, 1e-12);
    assert!(s.complete);
    let f = GraphFunction((0..30).map(|_| rng.normal::<f64>()).collect());
    let p = spectral_projection(&g, &s, &f, -1.0, 1e6).unwrap();
    let d = GraphFunction(f.iter().zip(p.iter()).map(|(a, b)| a - b).collect());
    assert!(g.graph_inner(&d, &d).unwrap() <= 1e-10 * g.graph_inner(&f, &f).unwrap());
    let partial = solve(&g, 5, SolverMethod::Dense, 1e-12);
    assert!(matches!(
        spectral_projection(&g, &partial, &f, -1.0, 1e6),
        Err(Error::IntervalNotResolved { .. })
    ));
}

proptest! {
    #[test]
    fn clusters_partition_the_indices(mut v in prop::collection::vec(0.0f64..50.0, 1..40), gap in 0.01f64..0.5) {
        v.sort_by(f64::total_cmp);
        let c = cluster_eigenvalues(&v, gap);
        prop_assert_eq!(c[0].start, 0);
        prop_assert_eq!(c.last().unwrap().end, v.len());
        for w in c.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
            let (a, b) = (v[w[0].end - 1], v[w[1].start]);
            prop_assert!(b - a > gap * a.max(1.0));
        }
        for r in &c {
            for a in r.start..r.end - 1 {
                prop_assert!(v[a + 1] - v[a] <= gap * v[a].max(1.0));
            }
        }
    }
}
