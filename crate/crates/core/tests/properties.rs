mod common;

use common::*;
use proptest::prelude::*;
use sqdist::domain::DomainBox;
use sqdist::eikonal::TermKind;
use sqdist::interpolate::NodePolicy;
use sqdist::metric::MetricField;
use sqdist::multiindex::{enumerate, enumerate_up_to, MultiIndex};
use sqdist::oracles::{geodesic_distance, sobolev_error, FdField, SobolevSpec};
use sqdist::poly::MPoly;
use sqdist::wkb::{transport_residual, transport_source, C0Boundary, TransportOptions, WkbSet};
use std::collections::HashSet;
use std::sync::Arc;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn catalog() -> Vec<Arc<MetricField>> {
    vec![
        Arc::new(MetricField::log1d()),
        Arc::new(MetricField::hyperbolic_default()),
        perturbed(0.3),
        Arc::new(
            MetricField::constant(
                vec![vec![2.0, 1.0], vec![1.0, 2.0]],
                DomainBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
            )
            .unwrap(),
        ),
    ]
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn mpoly_product_obeys_leibniz(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let p = random_poly(&mut r, n, 6, 6);
        let q = random_poly(&mut r, n, 6, 6);
        let alpha = MultiIndex::new((0..n).map(|i| (seed >> (8 * i)) as u32 % 4).collect());
        let x: Vec<f64> = (0..n).map(|i| ((seed >> (16 + 8 * i)) % 300) as f64 / 100.0 - 1.5).collect();
        let direct = (&p * &q).eval_derivative(&alpha, &x);
        let sum = leibniz_sum(&p, &q, &alpha, &x);
        prop_assert!((direct - sum).abs() <= 1e-12 * sum.abs().max(1.0), "{direct} vs {sum}");
    }

    #[test]
    fn repeated_partials_equal_direct_derivative(seed in any::<u64>(), x in prop::collection::vec(-1.5f64..1.5, 3)) {
        let mut r = rng(seed);
        let p = random_poly(&mut r, 3, 6, 6);
        let alpha = MultiIndex::new(vec![(seed % 3) as u32, (seed / 3 % 3) as u32, (seed / 9 % 2) as u32]);
        let mut stepped = p.clone();
        for i in 0..3 {
            for _ in 0..alpha.get(i) {
                stepped = stepped.derivative(i);
            }
        }
        let a = stepped.eval(&x);
        let b = p.eval_derivative(&alpha, &x);
        prop_assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
    }

    #[test]
    fn enumeration_is_unique_and_graded(n in 1usize..=4, m in 0usize..=8) {
        let all = enumerate(n, m);
        let set: HashSet<_> = all.iter().cloned().collect();
        prop_assert_eq!(set.len(), all.len());
        prop_assert!(all.iter().all(|a| a.order() == m && a.dim() == n));
    }

    #[test]
    fn christoffel_matches_finite_differences(which in 0usize..4, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let metric = &catalog()[which];
        let b = metric.domain();
        let x: Vec<f64> = [u, v][..metric.dim()]
            .iter()
            .enumerate()
            .map(|(i, t)| b.lower[i] + t * (b.upper[i] - b.lower[i]))
            .collect();
        let exact = metric.christoffel(&x).unwrap();
        let fd = fd_christoffel(metric, &x, 1e-5);
        let n = metric.dim();
        for k in 0..n {
            for mu in 0..n {
                for nu in 0..n {
                    prop_assert!((exact.get(k, mu, nu) - fd[k][mu][nu]).abs() < 1e-6);
                }
            }
        }
        let inv = metric.invert_at(&x).unwrap();
        let prod = metric.a_matrix(&x) * inv.matrix();
        let eye = nalgebra::DMatrix::<f64>::identity(n, n);
        prop_assert!((prod - eye).amax() < 1e-10);
        if n == 2 {
            let (l1, l2) = metric.eigenvalues_2d(&x).unwrap();
            let a = metric.a_matrix(&x);
            prop_assert!((l1 + l2 - a.trace()).abs() < 1e-10 * a.trace().abs().max(1.0));
            prop_assert!((l1 * l2 - a.determinant()).abs() < 1e-10 * a.determinant().abs().max(1.0));
            prop_assert!(l1 >= l2);
        }
    }

    #[test]
    fn residual_derivatives_match_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_build(&mut r);
        let x = random_point(&mut r, q.metric().domain(), 0.05);
        for alpha in enumerate_up_to(q.dim(), 2) {
            let exact = q.residual_derivative(&x, &alpha).unwrap();
            let fd = fd_residual(&q, &x, &alpha);
            prop_assert!((exact - fd).abs() <= 1e-5 * exact.abs().max(1.0), "{alpha:?}: {exact} vs {fd}");
        }
        prop_assert_eq!(q.residual_derivative(&x, &MultiIndex::zero(q.dim())).unwrap(), q.residual(&x).unwrap());
    }

    #[test]
    fn built_approximants_satisfy_their_enforcement(seed in any::<u64>()) {
        let q = random_build(&mut rng(seed));
        prop_assert!(enforced_residual(&q) < 1e-8);
        for x in q.nodes() {
            prop_assert!(q.residual(x).unwrap().abs() < 1e-8);
        }
        let y = q.base_point().to_vec();
        let hstage = q.terms().iter().any(|t| matches!(t.kind, TermKind::HStage { .. }));
        let tol = if hstage { 1e-12 } else { 0.0 };
        for alpha in enumerate_up_to(q.dim(), 1) {
            prop_assert!(q.evaluate(&y, &alpha).abs() <= tol);
        }
    }

    #[test]
    fn appending_a_term_keeps_lower_order_node_data(seed in any::<u64>()) {
        let q = random_build(&mut rng(seed));
        let n = q.dim();
        for (t, term) in q.terms().iter().enumerate() {
            let TermKind::HStage { beta, node } = &term.kind else { continue };
            let before = q.truncated(t);
            let after = q.truncated(t + 1);
            let b = beta.order();
            for (l, x) in q.nodes().iter().enumerate() {
                let limit = if l < *node { b.saturating_sub(1) } else if l == *node { b.saturating_sub(1) } else { continue };
                if b == 0 {
                    continue;
                }
                for gamma in enumerate_up_to(n, limit) {
                    let (u, v) = (before.evaluate(x, &gamma), after.evaluate(x, &gamma));
                    prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0), "term {t} node {l} {gamma:?}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn builds_are_deterministic(seed in any::<u64>()) {
        let a = random_build(&mut rng(seed)).coefficients();
        let b = random_build(&mut rng(seed)).coefficients();
        prop_assert!(a.iter().map(|v| v.to_bits()).eq(b.iter().map(|v| v.to_bits())));
    }

    #[test]
    fn sobolev_l2_matches_plain_trapezoid(seed in any::<u64>(), p in 1.0f64..4.0, k in 5usize..30) {
        let mut r = rng(seed);
        let f = random_poly(&mut r, 2, 4, 5);
        let g = random_poly(&mut r, 2, 4, 5);
        let b = DomainBox::new(vec![-1.0, 0.0], vec![0.5, 2.0]);
        let ff = FdField::new(2, |x: &[f64]| f.eval(x));
        let gg = FdField::new(2, |x: &[f64]| g.eval(x));
        let spec = SobolevSpec { s: 0, p, points_per_axis: k };
        let got = sobolev_error(&ff, &gg, &spec, &b);
        let hx = 1.5 / (k - 1) as f64;
        let hy = 2.0 / (k - 1) as f64;
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 } * if j == 0 || j == k - 1 { 0.5 } else { 1.0 };
                let x = [-1.0 + hx * i as f64, hy * j as f64];
                acc += w * hx * hy * (f.eval(&x) - g.eval(&x)).abs().powf(p);
            }
        }
        let direct = acc.powf(1.0 / p);
        prop_assert!((got - direct).abs() <= 1e-12 * direct.max(1.0));
    }
}

proptest! {
    #![proptest_config(config(20))]

    #[test]
    fn geodesic_distance_is_symmetric(which in 0usize..2, u in prop::collection::vec(0.2f64..0.8, 4)) {
        let metric = if which == 0 { Arc::new(MetricField::hyperbolic_default()) } else { perturbed(0.3) };
        let b = metric.domain();
        let at = |s: f64, i: usize| b.lower[i] + s * (b.upper[i] - b.lower[i]);
        let x = [at(u[0], 0), at(u[1], 1)];
        let y = [at(u[2], 0), at(u[3], 1)];
        let dxy = geodesic_distance(&metric, &x, &y).unwrap();
        let dyx = geodesic_distance(&metric, &y, &x).unwrap();
        prop_assert!((dxy - dyx).abs() < 1e-8, "{dxy} vs {dyx}");
    }
}

proptest! {
    #![proptest_config(config(10))]

    #[test]
    fn geodesic_distance_obeys_the_triangle_inequality(which in 0usize..2, u in prop::collection::vec(0.2f64..0.8, 6)) {
        let metric = if which == 0 { Arc::new(MetricField::hyperbolic_default()) } else { perturbed(0.3) };
        let b = metric.domain();
        let at = |s: f64, i: usize| b.lower[i] + s * (b.upper[i] - b.lower[i]);
        let p: Vec<[f64; 2]> = (0..3).map(|k| [at(u[2 * k], 0), at(u[2 * k + 1], 1)]).collect();
        let d = |a: &[f64; 2], c: &[f64; 2]| geodesic_distance(&metric, a, c).unwrap();
        prop_assert!(d(&p[0], &p[2]) <= d(&p[0], &p[1]) + d(&p[1], &p[2]) + 1e-7);
    }
}

/// Ornstein–Uhlenbeck: `a = 1`, `b = −θx`, `y = 0`. Then `c₀ = θx²/2` and
/// `c₁ = θ/2 − θ²x²/6`; both are quadratics, so the grid stencils are exact.
#[test]
fn transport_solution_satisfies_its_discrete_equation() {
    let theta = 0.5;
    let region = DomainBox::new(vec![-3.0], vec![3.0]);
    let metric = Arc::new(MetricField::constant(vec![vec![1.0]], region.clone()).unwrap());
    let q = build(metric.clone(), &[0.0], &NodePolicy::Equispaced { intervals: 2 }, Mode::Hsp(2)).unwrap();
    let drift = vec![MPoly::from_terms(1, [(MultiIndex::new(vec![1]), -theta)])];
    let set = WkbSet::compute(q.clone(), drift.clone(), &region, 61, 1, C0Boundary::GaussianConsistent, &TransportOptions::default())
        .unwrap();
    let prev = vec![set.grid_values(0).to_vec()];
    let source = transport_source(&metric, &drift, set.grid(), &prev);
    let res = transport_residual(&metric, &q, set.grid(), set.grid_values(1), &source, 0).unwrap();
    let interior: Vec<f64> = res.iter().copied().filter(|v| v.is_finite()).collect();
    assert!(interior.len() > 40);
    let worst = interior.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "transport residual {worst:e}");
    for (p, x) in set.grid().points().iter().enumerate() {
        let x = x[0];
        assert!((set.grid_values(0)[p] - 0.5 * theta * x * x).abs() < 1e-6);
        let c1 = set.grid_values(1)[p];
        if c1.is_finite() {
            assert!((c1 - (0.5 * theta - theta * theta * x * x / 6.0)).abs() < 1e-6, "c1({x}) = {c1}");
        }
    }
}
