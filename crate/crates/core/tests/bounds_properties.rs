use hardcoreboost::bounds::{
    core_classification_bound, full_risk_bound, rademacher_surrogate_deviation, vc_unbounded_bound, BoundInputs,
};
use hardcoreboost::Loss;
use proptest::prelude::*;

fn inputs(m: f64, n: f64, delta: f64, core_mass: f64) -> BoundInputs {
    BoundInputs {
        m,
        n,
        delta,
        epsilon: 0.0,
        rho: 0.0,
        phi0: None,
        core_mass,
        c: 2.0,
        b: 1.0,
        m_core: None,
        m_plus: None,
    }
}

fn loss_strategy() -> impl Strategy<Value = Loss> {
    prop_oneof![
        Just(Loss::Exp),
        Just(Loss::Logistic),
        Just(Loss::Hinge),
        (0.1f64..2.0, 0.1f64..2.0).prop_map(|(a, b)| Loss::cone(a, b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn totals_shrink_with_more_data(m in 1e4f64..1e7, n in 1.0f64..1e3, delta in 1e-4f64..0.5, mu in 0.0f64..=1.0) {
        let small = full_risk_bound(&inputs(m, n, delta, mu), &Loss::Hinge, 0.0).unwrap();
        let large = full_risk_bound(&inputs(4.0 * m, n, delta, mu), &Loss::Hinge, 0.0).unwrap();
        prop_assert!(large.total <= small.total + 1e-15);
    }

    #[test]
    fn totals_grow_with_confidence_and_class_size(m in 1e4f64..1e7, n in 1.0f64..1e3, delta in 1e-4f64..0.5, mu in 0.0f64..=1.0) {
        let base = full_risk_bound(&inputs(m, n, delta, mu), &Loss::Hinge, 0.0).unwrap().total;
        let tighter = full_risk_bound(&inputs(m, n, delta / 10.0, mu), &Loss::Hinge, 0.0).unwrap().total;
        let wider = full_risk_bound(&inputs(m, 2.0 * n, delta, mu), &Loss::Hinge, 0.0).unwrap().total;
        prop_assert!(tighter >= base - 1e-15);
        prop_assert!(wider >= base - 1e-15);
    }

    #[test]
    fn total_composes_the_core_and_complement_terms(
        loss in loss_strategy(),
        m in 1e3f64..1e7,
        n in 1.0f64..1e3,
        delta in 1e-4f64..0.5,
        mu in 0.01f64..0.99,
        approx in 0.0f64..0.1,
    ) {
        let dp = delta / 8.0;
        let report = full_risk_bound(&inputs(m, n, delta, mu), &loss, approx).unwrap();
        // Each region is charged at half its expected count.
        let core = core_classification_bound(&loss, 2.0, n, dp, 0.0, m * mu / 2.0, approx).unwrap().value;
        let vc = vc_unbounded_bound(n, m * (1.0 - mu) / 2.0, 0.0, loss.value_at_origin(), dp, true).unwrap();
        prop_assert!((report.total - (core + vc)).abs() <= 1e-12 * (1.0 + report.total));
    }

    #[test]
    fn deviation_scales_as_inverse_root_m(m in 10.0f64..1e6, b in 0.1f64..5.0, delta in 1e-3f64..0.9) {
        let one = rademacher_surrogate_deviation(4.0, m, b, 1.0, 2.0, delta).unwrap();
        let four = rademacher_surrogate_deviation(4.0, 4.0 * m, b, 1.0, 2.0, delta).unwrap();
        prop_assert!((one / four - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn fenchel_young_inequality(loss in loss_strategy(), z in -30.0f64..30.0, g in 0.0f64..3.0) {
        let conj = loss.conjugate(g);
        prop_assert!(loss.value(z) + conj >= g * z - 1e-9 * (1.0 + loss.value(z)));
    }

    #[test]
    fn conjugate_is_infinite_below_zero(loss in loss_strategy(), g in -5.0f64..-1e-6) {
        prop_assert_eq!(loss.conjugate(g), f64::INFINITY);
    }

    #[test]
    fn psi_inverse_bound_is_monotone(loss in loss_strategy(), r in 0.0f64..4.0, dr in 0.0f64..1.0) {
        let lo = loss.psi_inverse_bound(r).unwrap();
        let hi = loss.psi_inverse_bound(r + dr).unwrap();
        prop_assert!(lo >= 0.0 && hi >= lo);
    }
}

#[test]
fn psi_inverse_bound_vanishes_at_zero() {
    for loss in [Loss::Exp, Loss::Logistic, Loss::Hinge, Loss::cone(1.0, 1.0).unwrap()] {
        assert_eq!(loss.psi_inverse_bound(0.0).unwrap(), 0.0);
    }
}
