mod common;

use laplacenet::{
    build_net, verify_net, Manifold, ModeLabel, Point, QuadratureSet, SampledFunction, SeededRng,
};
use proptest::prelude::*;

fn models() -> Vec<Manifold> {
    [
        "circle:1.5",
        "sphere2:1",
        "torus2:6.283185307179586,6.283185307179586",
        "torus2:1,2",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect()
}

#[test]
fn distance_is_a_metric() {
    for m in models() {
        let mut rng = SeededRng::new(4);
        let pts = m.uniform_sample(&mut rng, 30_000).unwrap();
        for t in pts.chunks_exact(3).take(10_000) {
            let (x, y, z) = (&t[0], &t[1], &t[2]);
            let (xy, yz, xz) = (m.distance(x, y), m.distance(y, z), m.distance(x, z));
            assert!(xz <= xy + yz + 1e-12, "{m}: {xz} > {xy} + {yz}");
            assert!((xy - m.distance(y, x)).abs() < 1e-14);
            assert!(xy >= 0.0 && xy <= m.diameter() + 1e-12);
            assert_eq!(m.distance(x, x), 0.0);
        }
    }
}

#[test]
fn eigenfunctions_are_orthonormal_by_quadrature() {
    for m in models() {
        let mut rng = SeededRng::new(8);
        let samples = m.uniform_sample(&mut rng, 1_000_000).unwrap();
        let q = QuadratureSet {
            weight: m.volume() / samples.len() as f64,
            cell_of_sample: vec![0; samples.len()],
            distance_to_center: vec![0.0; samples.len()],
            samples,
        };
        let exact = m.exact_spectrum(9).unwrap();
        let fs: Vec<SampledFunction<f64>> = exact
            .labels
            .iter()
            .map(|&l| SampledFunction::eigenfunction(&m, &q, l).unwrap())
            .collect();
        for a in 0..fs.len() {
            for b in a..fs.len() {
                let g = fs[a].inner(&fs[b], &q);
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((g - target).abs() < 0.01, "{m}: G[{a}][{b}] = {g}");
            }
        }
    }
}

#[test]
fn exact_spectra_match_closed_forms() {
    let s: Manifold = "sphere2:1".parse().unwrap();
    assert_eq!(
        s.exact_spectrum(10).unwrap().eigenvalues,
        vec![0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0, 12.0]
    );
    let t: Manifold = "torus2:6.283185307179586,6.283185307179586"
        .parse()
        .unwrap();
    let ev = t.exact_spectrum(9).unwrap().eigenvalues;
    for (a, b) in ev.iter().zip([0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    let s2: Manifold = "sphere2:2".parse().unwrap();
    assert_eq!(
        s2.mode_eigenvalue(ModeLabel::Sphere { l: 1, m: 0 })
            .unwrap(),
        0.5
    );
}

#[test]
fn nets_cover_and_separate() {
    for m in models() {
        let eps = 0.2 * m.injectivity_radius().min(1.0);
        let mut rng = SeededRng::new(6);
        let net = build_net(&m, eps, &mut rng, 50).unwrap();
        assert!(net.covering_radius <= eps);
        let report = verify_net(&net, &m, &mut rng, 20_000).unwrap();
        assert!(report.max_gap <= eps, "{m}: probe gap {}", report.max_gap);
        let total: f64 = net.mu.iter().sum();
        assert!((total - m.volume()).abs() < 1e-9 * m.volume());
        // Every sample sits in its nearest cell.
        let q = &net.quadrature;
        for s in (0..q.len()).step_by(97) {
            let own = m.distance(&q.samples[s], &net.points[q.cell_of_sample[s] as usize]);
            let best = net
                .points
                .iter()
                .map(|p| m.distance(&q.samples[s], p))
                .fold(f64::INFINITY, f64::min);
            assert!(own <= best + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_points_parse_onto_the_surface(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        let m: Manifold = "sphere2:1.5".parse().unwrap();
        prop_assume!(x * x + y * y + z * z > 1e-6);
        let r = (x * x + y * y + z * z).sqrt() / 1.5;
        let p: laplacenet::Result<Point> = m.point_from_slice(&[x / r, y / r, z / r]);
        prop_assert!(m.contains(&p.unwrap(), 1e-9));
    }

    #[test]
    fn torus_distance_is_translation_invariant(a in 0.0f64..6.0, b in 0.0f64..6.0, s in 0.0f64..6.0, t in 0.0f64..6.0) {
        let m: Manifold = "torus2:6,6".parse().unwrap();
        let p = m.point_from_slice(&[a, b]).unwrap();
        let q = m.point_from_slice(&[s, t]).unwrap();
        let p2 = m.point_from_slice(&[(a + 1.7) % 6.0, (b + 4.1) % 6.0]).unwrap();
        let q2 = m.point_from_slice(&[(s + 1.7) % 6.0, (t + 4.1) % 6.0]).unwrap();
        prop_assert!((m.distance(&p, &q) - m.distance(&p2, &q2)).abs() < 1e-9);
    }
}
