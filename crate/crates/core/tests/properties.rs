use std::sync::Arc;

use mgcurv_core::curvature::CurvatureFunction;
use mgcurv_core::extension::extend_graph;
use mgcurv_core::functional::{cheeger_energy, entropy, fisher_information};
use mgcurv_core::regularization::RegularizationMap;
use mgcurv_core::transport::{w2, w2_distance};
use mgcurv_core::{Atom, DiscreteMeasure, GraphPoint, Grid, GridFunction, HeatSemigroup, MetricGraph};
use proptest::prelude::*;

/// Small connected graphs with loops and multi-edges among them.
fn graph_strategy() -> impl Strategy<Value = MetricGraph> {
    let len = || 0.4f64..1.6;
    prop_oneof![
        proptest::collection::vec(len(), 2..5).prop_map(|l| MetricGraph::star(&l).unwrap()),
        len().prop_map(|l| MetricGraph::circle(l).unwrap()),
        (len(), len(), len()).prop_map(|(a, b, c)| MetricGraph::from_edges(3, &[(0, 1, a), (1, 2, b), (2, 1, c)]).unwrap()),
        (len(), len(), len()).prop_map(|(a, b, c)| MetricGraph::from_edges(2, &[(0, 1, a), (0, 1, b), (1, 0, c)]).unwrap()),
        (len(), len()).prop_map(|(a, b)| MetricGraph::from_edges(3, &[(0, 1, a), (1, 2, b)]).unwrap()),
    ]
}

fn point(g: &MetricGraph, e: usize, u: f64) -> GraphPoint {
    let e = e % g.num_edges();
    let half = g.edge(e).half();
    GraphPoint::new(e, -half + u * 2.0 * half)
}

fn unit() -> std::ops::Range<f64> {
    0.0..1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_a_metric(
        g in graph_strategy(),
        e in proptest::array::uniform3(0usize..8),
        u in proptest::array::uniform3(unit()),
    ) {
        let [x, y, z] = [0, 1, 2].map(|k| point(&g, e[k], u[k]));
        let (dxy, dyz, dxz) = (g.distance(&x, &y), g.distance(&y, &z), g.distance(&x, &z));
        prop_assert!(dxz <= dxy + dyz + 1e-12);
        prop_assert!((dxy - g.distance(&y, &x)).abs() <= 1e-15);
        prop_assert_eq!(g.distance(&x, &x), 0.0);
        prop_assert_eq!(dxy == 0.0, g.same_point(&x, &y));
    }

    #[test]
    fn geodesic_points_split_distance(
        g in graph_strategy(),
        e in proptest::array::uniform2(0usize..8),
        u in proptest::array::uniform2(unit()),
        s in unit(),
    ) {
        let (x, y) = (point(&g, e[0], u[0]), point(&g, e[1], u[1]));
        let d = g.distance(&x, &y);
        let m = g.geodesic_point(&x, &y, s);
        prop_assert!((g.distance(&x, &m) - s * d).abs() <= 1e-12);
        prop_assert!((g.distance(&m, &y) - (1.0 - s) * d).abs() <= 1e-12);
    }

    #[test]
    fn extension_keeps_original_distances(
        g in graph_strategy(),
        eps in 0.01f64..0.3,
        e in proptest::array::uniform2(0usize..8),
        u in proptest::array::uniform2(unit()),
    ) {
        let (big, ext) = extend_graph(&g, eps).unwrap();
        let (x, y) = (point(&g, e[0], u[0]), point(&g, e[1], u[1]));
        let d = big.distance(&ext.embed(&x), &ext.embed(&y));
        prop_assert!((d - g.distance(&x, &y)).abs() <= 1e-12);
    }

    #[test]
    fn heat_conserves_mass_and_is_symmetric(
        g in graph_strategy(),
        t in 0.001f64..1.0,
        seed in proptest::collection::vec(-1.0f64..1.0, 64),
        e in proptest::array::uniform2(0usize..8),
        u in proptest::array::uniform2(unit()),
    ) {
        let grid = Arc::new(Grid::discretize(Arc::new(g), 0.1));
        let heat = HeatSemigroup::for_grid(grid.clone()).unwrap();
        let f = GridFunction::new(grid.clone(), (0..grid.len()).map(|i| seed[i % seed.len()] + 0.3).collect());
        let pf = heat.apply_pt(&f, t);
        let l1 = grid.integrate(&f.values.iter().map(|v| v.abs()).collect::<Vec<_>>());
        prop_assert!((pf.integral() - f.integral()).abs() <= 1e-10 * l1);

        let gr = grid.graph();
        let (x, y) = (point(gr, e[0], u[0]), point(gr, e[1], u[1]));
        let (a, b) = (heat.kernel(t, &x, &y).unwrap(), heat.kernel(t, &y, &x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn cheeger_parallelogram(
        g in graph_strategy(),
        a in proptest::collection::vec(-2.0f64..2.0, 64),
        b in proptest::collection::vec(-2.0f64..2.0, 64),
    ) {
        let grid = Arc::new(Grid::discretize(Arc::new(g), 0.1));
        let n = grid.len();
        let f = GridFunction::new(grid.clone(), (0..n).map(|i| a[i % 64] * (i as f64 * 0.37).sin()).collect());
        let h = GridFunction::new(grid.clone(), (0..n).map(|i| b[i % 64]).collect());
        let lhs = cheeger_energy(&f.zip_with(&h, |x, y| x + y)) + cheeger_energy(&f.zip_with(&h, |x, y| x - y));
        let rhs = 2.0 * cheeger_energy(&f) + 2.0 * cheeger_energy(&h);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn entropy_decreases_and_fisher_is_nonnegative(
        g in graph_strategy(),
        w in proptest::collection::vec(0.05f64..2.0, 64),
    ) {
        let grid = Arc::new(Grid::discretize(Arc::new(g), 0.1));
        let heat = HeatSemigroup::for_grid(grid.clone()).unwrap();
        let mu = DiscreteMeasure::probability_density(grid.clone(), (0..grid.len()).map(|i| w[i % 64]).collect());
        let mut last = entropy(&mu);
        for t in [0.01, 0.05, 0.2, 1.0] {
            let m = heat.apply_ht(&mu, t);
            let e = entropy(&m);
            prop_assert!(e <= last + 1e-12);
            prop_assert!(fisher_information(&m) >= 0.0);
            last = e;
        }
        prop_assert_eq!(fisher_information(&DiscreteMeasure::uniform(grid)), 0.0);
    }

    #[test]
    fn w2_triangle_and_duality(
        g in graph_strategy(),
        pts in proptest::collection::vec((0usize..8, unit(), 0.1f64..1.0), 9),
    ) {
        let grid = Arc::new(Grid::discretize(Arc::new(g), 0.25));
        let gr = grid.graph().clone();
        let measure = |k: usize| {
            let atoms: Vec<Atom> = pts[3 * k..3 * k + 3]
                .iter()
                .map(|&(e, u, m)| Atom { point: point(&gr, e, u), mass: m })
                .collect();
            let total: f64 = atoms.iter().map(|a| a.mass).sum();
            DiscreteMeasure::atoms(grid.clone(), atoms.into_iter().map(|a| Atom { mass: a.mass / total, ..a }).collect())
        };
        let (x, y, z) = (measure(0), measure(1), measure(2));
        let (dxy, dyz, dxz) = (w2_distance(&x, &y).unwrap(), w2_distance(&y, &z).unwrap(), w2_distance(&x, &z).unwrap());
        prop_assert!(dxz <= dxy + dyz + 1e-12);
        let (_, plan) = w2(&x, &y).unwrap();
        prop_assert!(plan.duality_gap() <= 1e-9);
    }

    #[test]
    fn regularization_is_linear_and_capped(
        g in graph_strategy(),
        eps in 0.05f64..0.2,
        e in proptest::array::uniform2(0usize..8),
        u in proptest::array::uniform2(unit()),
        w in 0.0f64..1.0,
    ) {
        let grid = Arc::new(Grid::discretize(Arc::new(g), 0.05));
        let map = RegularizationMap::new(grid.clone(), eps).unwrap();
        let gr = grid.graph().clone();
        let a = DiscreteMeasure::dirac(grid.clone(), point(&gr, e[0], u[0]));
        let b = DiscreteMeasure::uniform(grid.clone());
        let mix = DiscreteMeasure::mixture(&[(w, &a), (1.0 - w, &b)]);
        let (ra, rb, rm) = (map.regularize_measure(&a), map.regularize_measure(&b), map.regularize_measure(&mix));
        for i in 0..rm.density.len() {
            let lin = w * ra.density[i] + (1.0 - w) * rb.density[i];
            prop_assert!((rm.density[i] - lin).abs() <= 1e-13 * lin.abs().max(1.0));
        }
        for r in [&ra, &rb, &rm] {
            prop_assert!((r.total_mass() - 1.0).abs() <= 1e-12);
            prop_assert!(r.density.iter().all(|&f| f <= 1.0 / (2.0 * eps)));
        }
    }

    #[test]
    fn r_tends_to_its_diagonal(c in 1.0f64..4.0, k in 0.0f64..20.0, t in 0.0f64..1.0) {
        let cf = CurvatureFunction::new(c, k);
        let diag = (2.0 * k * t).exp() / (c * c);
        prop_assert!((cf.r(t, t) - diag).abs() <= 1e-14 * diag);
        prop_assert!((cf.r(t, t + 1e-9) - diag).abs() <= 1e-7 * diag);
    }
}
