use issparabolic::bounds::{
    choose_epsilon, epsilon_max, gain_factor, iss_bound, max_estimate_robin, DisturbanceMagnitudes, GainMeasure,
};
use issparabolic::exprlang::Expression;
use issparabolic::geometry::BallGeometry;
use issparabolic::problem::{BoundConstants, BoundaryKind};
use proptest::prelude::*;

/// Constant sets satisfying both coupling inequalities.
fn feasible_constants() -> impl Strategy<Value = BoundConstants> {
    (0.1f64..3.0, 1.0f64..3.0, 0.0f64..1.0, 0.1f64..3.0, 0.5f64..2.0).prop_filter_map(
        "coupling must hold",
        |(a_lower, a_ratio, b_frac, c_lower, trace)| {
            let c2 = trace * trace;
            // b_upper strictly below both caps
            let cap = (2.0 * c_lower / (1.0 + 2.0 * c2)).min(a_lower / c2);
            let k = BoundConstants::new(a_lower, a_lower * a_ratio, b_frac * cap * 0.999, c_lower, trace).ok()?;
            k.coupling_holds().then_some(k)
        },
    )
}

fn magnitudes() -> impl Strategy<Value = DisturbanceMagnitudes> {
    (0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0)
        .prop_map(|(f, d, s, l)| DisturbanceMagnitudes::new(f, d, s, l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn chosen_epsilon_beats_random_feasible_epsilons(
        k in feasible_constants(),
        fractions in prop::collection::vec(1e-6f64..=1.0, 100),
    ) {
        let choice = choose_epsilon(&k).unwrap();
        let cap = epsilon_max(&k).unwrap();
        prop_assert!(choice.epsilon > 0.0 && choice.epsilon <= cap);
        prop_assert!(choice.lambda > 0.0);
        for f in fractions {
            let g = gain_factor(&k, f * cap);
            prop_assert!(choice.gain_factor <= g * (1.0 + 1e-12), "eps {} g {} vs {}", f * cap, g, choice.gain_factor);
        }
    }

    #[test]
    fn envelopes_are_monotone_in_the_disturbances(
        k in feasible_constants(),
        m in magnitudes(),
        scale in 1.0f64..4.0,
        horizon in 0.01f64..5.0,
        n in 1usize..=3,
        kind in prop::sample::select(BoundaryKind::ALL.to_vec()),
    ) {
        let g = BallGeometry::new(n, 1.0).unwrap();
        let psi = Expression::parse("u + u^3").unwrap();
        let est = |m: &DisturbanceMagnitudes, t: f64| iss_bound(kind, &k, &g, m, &psi, t, GainMeasure::Sphere).unwrap();
        let base = est(&m, horizon);
        let bigger_d = DisturbanceMagnitudes { sup_d: m.sup_d * scale, ..m };
        let bigger_f = DisturbanceMagnitudes { sup_f: m.sup_f * scale, ..m };
        prop_assert!(est(&bigger_d, horizon).total >= base.total);
        prop_assert!(est(&bigger_f, horizon).total >= base.total);
        prop_assert!(est(&m, horizon * scale).total <= base.total);
        prop_assert!((base.total - (base.transient + base.gain_d.max(base.gain_f))).abs() <= 1e-12 * base.total
            || kind != BoundaryKind::Dirichlet);
        let zero = DisturbanceMagnitudes::new(0.0, 0.0, 0.0, 0.0).unwrap();
        prop_assert_eq!(est(&zero, horizon).total, 0.0);
    }

    #[test]
    fn robin_max_estimate_dominates_initial_data(k in feasible_constants(), m in magnitudes(), r in 0.2f64..3.0) {
        let g = BallGeometry::new(2, r).unwrap();
        prop_assert!(max_estimate_robin(&k, &g, &m) >= m.sup_phi);
    }
}
