use crzf_core::analytics::{
    expected_sinr_perfect, expected_sinr_rvq, perfect_terms, rvq_psi, rvq_terms, AnalyticsContext, LinkBudget,
    WishartMoments,
};
use crzf_core::oracle::{context_with_fallback, quadrature_moments};
use crzf_core::rvq::quantization_variance;
use proptest::prelude::*;

fn log_alpha() -> impl Strategy<Value = f64> {
    (-3.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

/// Range where the closed form is accurate for every M up to 8.
fn closed_form_alpha() -> impl Strategy<Value = f64> {
    (-3.0f64..1.5).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diagonal_and_off_diagonal_terms_add_up(m in 2usize..=8, alpha in log_alpha()) {
        let c = context_with_fallback(m, alpha).unwrap();
        prop_assert!((c.delta + (m as f64 - 1.0) * c.psi - c.xi).abs() <= 1e-12 * c.xi.max(1.0));
    }

    #[test]
    fn residual_coefficient_is_a_fraction(m in 2usize..=8, alpha in log_alpha()) {
        let c = context_with_fallback(m, alpha).unwrap();
        prop_assert!(c.big_delta > 0.0 && c.big_delta < 1.0, "Δ = {}", c.big_delta);
        prop_assert!(c.psi > 0.0 && c.delta > c.psi);
    }

    #[test]
    fn closed_form_matches_quadrature(m in 2usize..=8, alpha in closed_form_alpha()) {
        let c = WishartMoments::evaluate(m, alpha).unwrap();
        let q = quadrature_moments(m, alpha).unwrap();
        for (a, b) in [(c.d1, q.d1), (c.d2, q.d2), (c.f, q.f)] {
            prop_assert!((a - b).abs() <= 1e-7 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn more_bits_reduce_leakage(m in 2usize..=8, alpha in log_alpha(), b in 0u32..30) {
        let c = context_with_fallback(m, alpha).unwrap();
        prop_assert!(rvq_psi(&c, b + 1) <= rvq_psi(&c, b) + 1e-15);
    }
}

#[test]
fn eigenvalue_expectations_decrease_with_alpha() {
    for m in [2, 4, 8] {
        let mut prev = WishartMoments::evaluate(m, 1e-3).unwrap();
        for alpha in [1e-2, 1e-1, 1.0, 10.0, 30.0] {
            let cur = WishartMoments::evaluate(m, alpha).unwrap();
            assert!(cur.d2 < prev.d2 && cur.f < prev.f, "M={m} α={alpha}");
            prev = cur;
        }
    }
}

#[test]
fn closed_form_refuses_large_alpha_for_large_m() {
    assert!(matches!(AnalyticsContext::build(8, 100.0), Err(crzf_core::Error::Precision { .. })));
    assert!(context_with_fallback(8, 100.0).unwrap().big_delta < 1.0);
}

#[test]
fn fallback_agrees_where_both_work() {
    for (m, alpha) in [(4, 0.5), (8, 20.0)] {
        let a = AnalyticsContext::build(m, alpha).unwrap();
        let b = context_with_fallback(m, alpha).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn rvq_with_unlimited_bits_is_perfect_cdi() {
    let ctx = AnalyticsContext::build(4, 0.3).unwrap();
    let budget = LinkBudget {
        p_serving: 20.0,
        p_interf: vec![4.0],
        p_noncoord: vec![0.5, 0.25],
        users_per_cell: 2,
    };
    let perfect = expected_sinr_perfect(&ctx, &[&ctx], &budget).unwrap();
    let rvq = expected_sinr_rvq(&ctx, &[&ctx], &budget, &[200, 200]).unwrap();
    assert!((perfect / rvq - 1.0).abs() < 1e-12);
}

#[test]
fn noncoordinated_term_is_users_times_power() {
    let ctx = AnalyticsContext::build(4, 0.3).unwrap();
    let budget = LinkBudget {
        p_serving: 20.0,
        p_interf: vec![4.0],
        p_noncoord: vec![0.5, 0.25, 3.0],
        users_per_cell: 2,
    };
    let expected = 2.0 * (0.5 + 0.25 + 3.0);
    assert_eq!(perfect_terms(&ctx, &[&ctx], &budget).unwrap().noncoord, expected);
    assert_eq!(rvq_terms(&ctx, &[&ctx], &budget, &[4, 7]).unwrap().noncoord, expected);
}

#[test]
fn quantization_variance_values() {
    assert_eq!(quantization_variance(6, 4), 0.25);
    assert_eq!(quantization_variance(0, 4), 1.0);
    assert_eq!(quantization_variance(10, 1), 0.0);
}
