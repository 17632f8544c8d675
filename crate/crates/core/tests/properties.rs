//! Property tests for the structural identities that hold exactly on
//! finite spaces: complement symmetry, coarea, contraction bounds, prox
//! nonexpansiveness and the decomposition calculus.

use proptest::collection::vec;
use proptest::prelude::*;

use tvflow_core::cheeger::{decompose_m, is_calibrable, CalibrabilityMethod};
use tvflow_core::flow::{meyer_norm, poincare_constant, tv_prox, PoincareMethod, ProxOptions};
use tvflow_core::geometry::{
    coarea_check, lipschitz_contraction_check, localized_perimeter, perimeter, total_variation,
    PiecewiseLinear,
};
use tvflow_core::space::{from_weighted_graph, restrict, RandomWalkSpace, StateFunction, StateSet};

#[derive(Debug, Clone)]
struct GraphSpec {
    parents: Vec<usize>,
    tree_weights: Vec<f64>,
    extra: Vec<(usize, usize, f64)>,
    loops: Vec<f64>,
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = GraphSpec> {
    (2..=max_n).prop_flat_map(|n| {
        let parents = (1..n).map(|i| 0..i).collect::<Vec<_>>();
        (
            parents,
            vec(0.1..2.0f64, n - 1),
            vec((0..n, 0..n, 0.1..2.0f64), 0..n),
            vec(0.0..0.8f64, n),
        )
            .prop_map(|(parents, tree_weights, extra, loops)| GraphSpec {
                parents,
                tree_weights,
                extra,
                loops,
            })
    })
}

fn build_space(spec: &GraphSpec) -> RandomWalkSpace {
    let n = spec.parents.len() + 1;
    let label = |i: usize| format!("v{i:02}");
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    for (i, (&p, &w)) in spec.parents.iter().zip(&spec.tree_weights).enumerate() {
        edges.push((label(i + 1), label(p), w));
    }
    for &(a, b, w) in &spec.extra {
        if a != b && a < n && b < n {
            edges.push((label(a), label(b), w));
        }
    }
    for (i, &w) in spec.loops.iter().enumerate() {
        if w > 0.05 {
            edges.push((label(i), label(i), w));
        }
    }
    from_weighted_graph(&edges, true).unwrap()
}

fn function_from(values: &[f64], space: &RandomWalkSpace) -> StateFunction {
    space.function_from_values(values[..space.len()].to_vec())
}

fn set_from(bits: &[bool], space: &RandomWalkSpace) -> StateSet {
    let indices: Vec<u32> = bits
        .iter()
        .take(space.len())
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i as u32)
        .collect();
    space.set_from_indices(&indices)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn perimeter_symmetry_and_bounds(
        spec in graph_strategy(10),
        bits in vec(any::<bool>(), 10),
    ) {
        let space = build_space(&spec);
        let e = set_from(&bits, &space);
        let rep = perimeter(&space, &e);
        let comp = perimeter(&space, &e.complement());
        prop_assert!((rep.perimeter - comp.perimeter).abs() <= 1e-12);
        prop_assert!(rep.perimeter <= rep.volume + 1e-12);
        prop_assert!(
            (rep.perimeter - (rep.volume - rep.self_interaction)).abs()
                <= 1e-9 * rep.volume.max(1.0)
        );
    }

    #[test]
    fn tv_dominated_by_l1_and_coarea_exact(
        spec in graph_strategy(10),
        values in vec(-3.0..3.0f64, 10),
    ) {
        let space = build_space(&spec);
        let u = function_from(&values, &space);
        let tv = total_variation(&space, &u);
        prop_assert!(tv <= space.lp_norm(&u, 1.0) + 1e-12);
        let coarea = coarea_check(&space, &u);
        prop_assert!(coarea.residual <= 1e-10);
    }

    #[test]
    fn localized_perimeter_full_window(
        spec in graph_strategy(10),
        bits in vec(any::<bool>(), 10),
    ) {
        let space = build_space(&spec);
        let e = set_from(&bits, &space);
        let localized = localized_perimeter(&space, &e, &space.full_set());
        let direct = perimeter(&space, &e).perimeter;
        prop_assert!((localized - direct).abs() <= 1e-12);
    }

    #[test]
    fn lipschitz_contraction(
        spec in graph_strategy(10),
        values in vec(-3.0..3.0f64, 10),
        slope in 0.1..4.0f64,
    ) {
        let space = build_space(&spec);
        let u = function_from(&values, &space);
        let clamp = PiecewiseLinear::clamp01();
        prop_assert!(lipschitz_contraction_check(&space, &u, &clamp).holds);
        let scale = PiecewiseLinear::scale(slope, -5.0, 5.0);
        let rep = lipschitz_contraction_check(&space, &u, &scale);
        prop_assert!(rep.holds);
        let kink = PiecewiseLinear::new(vec![(-5.0, -1.0), (0.0, 0.0), (5.0, slope)]).unwrap();
        prop_assert!(lipschitz_contraction_check(&space, &u, &kink).holds);
    }

    #[test]
    fn prox_nonexpansive(
        spec in graph_strategy(8),
        a in vec(-2.0..2.0f64, 8),
        b in vec(-2.0..2.0f64, 8),
        tau in 0.05..1.0f64,
    ) {
        let space = build_space(&spec);
        let f1 = function_from(&a, &space);
        let f2 = function_from(&b, &space);
        let opts = ProxOptions { gap_tolerance: 1e-11, max_iters: 400_000 };
        let s1 = tv_prox(&space, &f1, tau, &opts, None);
        let s2 = tv_prox(&space, &f2, tau, &opts, None);
        let before = space.lp_norm(&f1.zip(&f2, |x, y| x - y), 2.0);
        let after = space.lp_norm(&s1.u.zip(&s2.u, |x, y| x - y), 2.0);
        prop_assert!(after <= before + 1e-7);
    }

    #[test]
    fn decomposition_calculus(
        spec in graph_strategy(10),
        bits in vec(any::<bool>(), 10),
    ) {
        let space = build_space(&spec);
        let omega = set_from(&bits, &space);
        prop_assume!(!omega.is_empty_set());
        let parts = decompose_m(&space, &omega);
        // Parts cover omega without overlap and have zero interaction.
        let mut seen = space.empty_set();
        for part in &parts {
            prop_assert!(seen.is_disjoint(part));
            seen = seen.union(part);
        }
        prop_assert_eq!(seen, omega.clone());
        let base = perimeter(&space, &omega);
        if parts.len() > 1 && base.volume > 0.0 {
            let min_ratio = parts
                .iter()
                .map(|p| {
                    let rep = perimeter(&space, p);
                    rep.perimeter / rep.volume
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(min_ratio <= base.perimeter / base.volume + 1e-9);
        }
    }

    #[test]
    fn restriction_preserves_balance(
        spec in graph_strategy(10),
        bits in vec(any::<bool>(), 10),
    ) {
        let space = build_space(&spec);
        let omega = set_from(&bits, &space);
        prop_assume!(!omega.is_empty_set());
        if let Ok(sub) = restrict(&space, &omega) {
            for x in 0..sub.len() as u32 {
                prop_assert!((sub.row_sum(x) - 1.0).abs() <= 1e-12);
            }
            // Detailed balance is inherited edge by edge.
            for e in sub.edges() {
                let forward = sub.nu(e.a) * sub.kernel(e.a, e.b);
                let backward = sub.nu(e.b) * sub.kernel(e.b, e.a);
                prop_assert!((forward - backward).abs() <= 1e-12 * forward.max(1.0));
            }
        }
    }

    #[test]
    fn meyer_norm_scaling_and_upper_bound(
        spec in graph_strategy(8),
        values in vec(-2.0..2.0f64, 8),
        c in 0.25..4.0f64,
    ) {
        let space = build_space(&spec);
        let raw = function_from(&values, &space);
        let centered = raw.shifted(-space.mean(&raw));
        prop_assume!(space.lp_norm(&centered, 1.0) > 1e-9);
        let norm = meyer_norm(&space, &centered).unwrap();
        let scaled = meyer_norm(&space, &centered.scaled(c)).unwrap();
        prop_assert!((scaled - c * norm).abs() <= 1e-6 * (1.0 + scaled));
        // Lower bound never exceeds the 2-Poincare upper bound.
        let lambda2 = poincare_constant(&space, 2, 1, &PoincareMethod::ExactSmall { limit: 12 })
            .unwrap()
            .constant;
        let upper = space.lp_norm(&centered, 2.0) / lambda2;
        prop_assert!(norm <= upper + 1e-7 * (1.0 + upper));
    }

    #[test]
    fn calibrability_methods_agree(
        spec in graph_strategy(8),
        bits in vec(any::<bool>(), 8),
    ) {
        let space = build_space(&spec);
        let omega = set_from(&bits, &space);
        prop_assume!(!omega.is_empty_set() && omega.count() < space.len());
        let exhaustive =
            is_calibrable(&space, &omega, CalibrabilityMethod::Exhaustive { limit: 22 }).unwrap();
        let lp = is_calibrable(&space, &omega, CalibrabilityMethod::Lp).unwrap();
        prop_assert_eq!(exhaustive.calibrable, lp.calibrable);
    }
}
