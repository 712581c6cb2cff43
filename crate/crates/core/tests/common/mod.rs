#![allow(dead_code)]

use laplacenet::{build_graph, build_net, Graph, GraphFunction, Manifold, Net, SeededRng};

pub fn sphere() -> Manifold {
    Manifold::sphere2(1.0).unwrap()
}

pub fn torus() -> Manifold {
    "torus2:6.283185307179586,6.283185307179586"
        .parse()
        .unwrap()
}

pub fn net_and_graph(
    m: &Manifold,
    eps: f64,
    rho: f64,
    seed: u64,
    oversample: usize,
) -> (Net, Graph) {
    let net = build_net(m, eps, &mut SeededRng::new(seed), oversample).unwrap();
    let graph = build_graph(&net, m, rho).unwrap();
    (net, graph)
}

pub fn random_function(n: usize, rng: &mut SeededRng) -> GraphFunction<f64> {
    GraphFunction((0..n).map(|_| rng.normal::<f64>()).collect())
}

pub fn rel_diff(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}
