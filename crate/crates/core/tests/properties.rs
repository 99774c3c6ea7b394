use std::f64::consts::PI;

use proptest::prelude::*;

use ricci_k_lab::assembly::{check_gluing, plan_docking, GluingInterface};
use ricci_k_lab::curvature::{curvature_blocks, ClosedFormProfile, ProfileDomain, ScaledProfile, XDomain};
use ricci_k_lab::jet::Jet;
use ricci_k_lab::kchain::{
    check_inequalities, diagonalize_mixed_block, row_sum_criterion, BlockOperator, BlockValues,
};
use ricci_k_lab::report::{DockingScenario, ObstructionScenario, Scenario, ScenarioKind};
use ricci_k_lab::topology::{
    core_obstruction, plumbing_k_range, slice_metric_factor, sphere_bundle_connected_sum,
    surgery_k_range, BundleVertex, CurvatureDatum, ManifoldDescriptor, PlumbingGraph, SphereBundle,
    VertexRole,
};

fn blocks() -> impl Strategy<Value = BlockValues> {
    (-1.0..2.0, -1.0..2.0, -1.0..2.0, -1.5..1.5, -1.0..2.0f64)
        .prop_map(|(a, b, c, d, e)| BlockValues::new(a, b, c, d, e))
}

fn profile(
    a0: f64,
    b0: f64,
    w: f64,
    amp: f64,
) -> ClosedFormProfile<impl Fn(Jet, Jet) -> Jet + Sync, impl Fn(Jet, Jet) -> Jet + Sync> {
    ClosedFormProfile {
        m: 4,
        domain: ProfileDomain {
            t_range: (0.1, 10.0),
            x: XDomain::Circle,
        },
        a: move |t: Jet, x: Jet| a0 + amp * (w * t).sin() * x.cos() + 0.1 * t,
        b: move |t: Jet, x: Jet| b0 + amp * (w * t + x).cos(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn blocks_scale_inversely_with_metric(
        a0 in 1.5..3.0f64, b0 in 1.5..3.0f64, w in 0.2..2.0f64, amp in -0.5..0.5f64,
        t in 0.5..5.0f64, x in 0.0..(2.0 * PI), c in 0.05..50.0f64,
    ) {
        let p = profile(a0, b0, w, amp);
        let sp = ScaledProfile { inner: &p, c };
        let b = curvature_blocks(&p, t, x).unwrap().orthonormal();
        let s = curvature_blocks(&sp, c * t, x).unwrap().orthonormal().scaled(c * c);
        let scale = b.scale();
        for (u, v) in [(b.l12, s.l12), (b.l13, s.l13), (b.l23, s.l23), (b.ltilde, s.ltilde), (b.l3, s.l3)] {
            prop_assert!((u - v).abs() <= 1e-10 * scale, "{u} vs {v}");
        }
    }

    #[test]
    fn x_independent_profiles_have_no_mixed_block(
        a0 in 1.5..3.0f64, b0 in 1.5..3.0f64, w in 0.2..2.0f64, t in 0.5..5.0f64, x in 0.0..(2.0 * PI),
    ) {
        let p = ClosedFormProfile {
            m: 3,
            domain: ProfileDomain { t_range: (0.1, 10.0), x: XDomain::Circle },
            a: move |t: Jet, _x: Jet| a0 + 0.3 * (w * t).sin(),
            b: move |t: Jet, _x: Jet| b0 + 0.2 * (w * t).cos(),
        };
        prop_assert_eq!(curvature_blocks(&p, t, x).unwrap().lambda_tilde, 0.0);
    }

    #[test]
    fn verdict_is_invariant_under_positive_scaling(b in blocks(), c in 1e-3..1e3f64, n in 6usize..10) {
        let k = 2 + (n - 6) % (n - 4);
        let v = check_inequalities(&BlockOperator::new(b, n, k).unwrap()).status;
        let w = check_inequalities(&BlockOperator::new(b.scaled(c), n, k).unwrap()).status;
        prop_assert_eq!(v, w);
    }

    #[test]
    fn closed_form_and_row_sum_agree(b in blocks(), n in 6usize..10, kk in 0usize..8) {
        let k = 2 + kk % (n - 4);
        let op = BlockOperator::new(b, n, k).unwrap();
        let closed = check_inequalities(&op).status.sign();
        let row = row_sum_criterion(&diagonalize_mixed_block(&b), n, k).status.sign();
        prop_assert!(closed.is_some());
        prop_assert_eq!(closed, row);
    }

    #[test]
    fn gluing_is_symmetric_and_scale_invariant(
        dim in 2usize..20, ka in -3.0..3.0f64, kb in -3.0..3.0f64, ln_c in -20.0..20.0f64,
    ) {
        let a = GluingInterface::round("a", dim, 1.0, ka);
        let b = GluingInterface::round("b", dim, 1.0, kb);
        let ab = check_gluing(&a, &b).unwrap();
        let ba = check_gluing(&b, &a).unwrap();
        prop_assert_eq!(ab.margin, ba.margin);
        prop_assert_eq!(ab.passed, ba.passed);
        let s = check_gluing(&a.rescaled_ln(ln_c), &b.rescaled_ln(ln_c)).unwrap();
        prop_assert_eq!(s.passed, ab.passed);
        prop_assert!((s.margin * ln_c.exp() - ab.margin).abs() <= 1e-12 * (ka.abs() + kb.abs()));
    }

    #[test]
    fn obstruction_is_monotone_in_k(n in 3usize..40, conn in 0usize..40, sphere in any::<bool>()) {
        let m = ManifoldDescriptor::new("M", n, conn.min(n), sphere).unwrap();
        let mut obstructed_above = false;
        for k in (1..n).rev() {
            let o = core_obstruction(&m, k).unwrap();
            if obstructed_above {
                prop_assert!(o.is_obstructed());
            }
            obstructed_above |= o.is_obstructed();
        }
    }

    #[test]
    fn surgery_and_single_plumbing_agree(p in 2usize..9, q in 2usize..9, k2 in 1usize..4) {
        prop_assume!(k2 <= p);
        // choose k1 so that p + k1 does not dominate
        let k1 = 1;
        let s = surgery_k_range(p, q, k1, k2).unwrap();
        let g = PlumbingGraph {
            vertices: vec![
                BundleVertex::new("M", q + 1, p + 1, CurvatureDatum::Ric(k1), VertexRole::Fixed),
                BundleVertex::new("E", p + 1, q + 1, CurvatureDatum::Core(k2), VertexRole::Other),
            ],
            edges: vec![(0, 1)],
        };
        let r = plumbing_k_range(&g).unwrap();
        prop_assert_eq!(r.k_min, s.k_min.max(p + k1));
        prop_assert_eq!(s.plumbing_bound, r.k_min);
    }

    #[test]
    fn sphere_bundle_graph_matches_formula(p in 2usize..8, q in 3usize..9, ell in 1usize..6, kk in 0usize..8) {
        let k = 1 + kk % (q - 1);
        let bundles: Vec<SphereBundle> = (0..ell)
            .map(|i| SphereBundle { name: format!("E{i}"), p, q })
            .collect();
        let s = sphere_bundle_connected_sum(&bundles, k).unwrap();
        prop_assert_eq!(s.k_min, (p + 2).max(p + k).max(q + 1));
        prop_assert!(s.graph_k_min >= s.k_min);
        prop_assert_eq!(s.graph.vertices.len(), 3 * ell - 2);
        prop_assert_eq!(s.graph.edges.len(), 3 * ell - 3);
    }

    #[test]
    fn slice_factor_is_monotone_and_bounded(f in 1e-3..1e3f64, b in 0.01..10.0f64, eps in 1e-3..1.0f64) {
        let v = slice_metric_factor(f, b, eps).unwrap();
        let w = slice_metric_factor(1.01 * f, b, eps).unwrap();
        prop_assert!(v > 0.0 && v < 1.0 + eps);
        prop_assert!(w > v);
    }

    #[test]
    fn scenario_echo_round_trips(n in 4usize..20, ell in 1usize..6, nu in 0.01..0.99f64, seed in any::<u32>(), k in 1usize..10) {
        let mut sc = Scenario::new(ScenarioKind::Docking);
        sc.seed = u64::from(seed);
        sc.docking = Some(DockingScenario { n, ell, nu, options: None });
        let back = Scenario::from_toml_str(&sc.to_toml().unwrap(), "echo").unwrap();
        prop_assert_eq!(&back, &sc);
        let mut ob = Scenario::new(ScenarioKind::Obstruction);
        ob.obstruction = Some(ObstructionScenario {
            name: None, n: Some(n), connectivity: Some(n / 2), homotopy_sphere: false, k,
        });
        let back = Scenario::from_toml_str(&ob.to_toml().unwrap(), "echo").unwrap();
        prop_assert_eq!(back, ob);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_docking_plans_have_positive_margins(n in 4usize..12, ell in 1usize..5, nu in 0.05..0.95f64) {
        let d = plan_docking(n, ell, nu).unwrap();
        for c in &d.constraints {
            prop_assert!(c.holds && c.margin > 0.0, "{c:?}");
        }
        prop_assert!(d.r0 < nu * nu && d.r_cone.cos() > nu);
    }
}
