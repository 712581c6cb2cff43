mod common;

use common::{net_and_graph, random_function, rel_diff, sphere};
use laplacenet::{
    discretize_p, lift_pstar, smallest_k, Graph, GraphFunction, SampledFunction, SeededRng,
};

fn dot(g: &Graph, u: &GraphFunction<f64>, v: &GraphFunction<f64>) -> f64 {
    g.graph_inner(u, v).unwrap()
}

#[test]
fn rayleigh_identity_and_symmetry() {
    let m = sphere();
    let (_, g) = net_and_graph(&m, 0.16, 0.4, 11, 100);
    let mut rng = SeededRng::new(1);
    for _ in 0..100 {
        let u = random_function(g.len(), &mut rng);
        let v = random_function(g.len(), &mut rng);
        let lu = g.apply_laplacian(&u).unwrap();
        let lv = g.apply_laplacian(&v).unwrap();
        let e = g.dirichlet_energy(&u).unwrap();
        assert!(rel_diff(e, dot(&g, &lu, &u), e) < 1e-12);
        let scale = g.graph_norm(&lu).unwrap() * g.graph_norm(&v).unwrap();
        assert!(rel_diff(dot(&g, &lu, &v), dot(&g, &u, &lv), scale) < 1e-12);
        assert!(e >= 0.0);
    }
}

#[test]
fn discretization_and_lift_are_adjoint() {
    let m = sphere();
    let (net, g) = net_and_graph(&m, 0.16, 0.4, 12, 100);
    let q = &net.quadrature;
    let mut rng = SeededRng::new(2);
    for _ in 0..100 {
        let u = random_function(net.len(), &mut rng);
        let f = SampledFunction((0..q.len()).map(|_| rng.normal::<f64>()).collect());
        let lifted = lift_pstar(&net, &u).unwrap();
        let nu = g.graph_norm(&u).unwrap();
        assert!(rel_diff(lifted.l2_norm(q), nu, nu) < 1e-12);
        let pf = discretize_p(&net, &f).unwrap();
        let lhs = dot(&g, &pf, &u);
        let rhs = f.inner(&lifted, q);
        assert!(rel_diff(lhs, rhs, f.l2_norm(q) * nu) < 1e-12);
        let back = discretize_p(&net, &lifted).unwrap();
        let err = back
            .iter()
            .zip(u.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let top = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * top);
    }
}

#[test]
fn measure_scaling_scales_the_spectrum() {
    let m = sphere();
    let (_, g) = net_and_graph(&m, 0.16, 0.4, 13, 100);
    let scaled = g.with_scaled_measure(3.0);
    let a = smallest_k(&g, 10, 1e-11).unwrap();
    let b = smallest_k(&scaled, 10, 1e-11).unwrap();
    for k in 1..10 {
        assert!(
            rel_diff(
                b.eigenvalues[k],
                3.0 * a.eigenvalues[k],
                3.0 * a.eigenvalues[k]
            ) < 1e-10
        );
    }
    assert!(b.eigenvalues[0].abs() < 1e-10 * b.eigenvalues[1]);
    // Energy scales by c^2 and the norm by c.
    let u = random_function(g.len(), &mut SeededRng::new(3));
    let e = g.dirichlet_energy(&u).unwrap();
    assert!(rel_diff(scaled.dirichlet_energy(&u).unwrap(), 9.0 * e, 9.0 * e) < 1e-12);
}

#[test]
fn kernel_is_the_constants() {
    let m = sphere();
    let (_, g) = net_and_graph(&m, 0.16, 0.4, 14, 100);
    assert!(g.is_connected());
    let s = smallest_k(&g, 3, 1e-11).unwrap();
    assert!(s.eigenvalues[0].abs() <= 1e-10 * s.eigenvalues[1]);
    let c = 1.0 / m.volume().sqrt();
    let sign = s.eigenvectors[0][0].signum();
    for &x in s.eigenvectors[0].iter() {
        assert!((sign * x - c).abs() < 1e-8);
    }
    let ones = GraphFunction::constant(g.len(), 1.0);
    assert!(g
        .apply_laplacian(&ones)
        .unwrap()
        .iter()
        .all(|x| x.abs() < 1e-9));
}

#[test]
fn disconnected_graph_has_a_kernel_per_component() {
    let mu = vec![0.5, 1.0, 2.0, 1.5, 0.25];
    let g = Graph::with_weights(mu, &[(0, 1, 1.0), (1, 2, 0.5), (3, 4, 2.0)]);
    assert_eq!(g.components(), 2);
    let s = smallest_k(&g, 3, 1e-12).unwrap();
    assert!(s.eigenvalues[0].abs() < 1e-12 && s.eigenvalues[1].abs() < 1e-12);
    assert!(s.eigenvalues[2] > 0.1);
}
