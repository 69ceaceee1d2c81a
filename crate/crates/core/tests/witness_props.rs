mod common;

use common::*;
use dew_core::fock::{BasisTag, FockOperator};
use dew_core::linalg::CMatrix;
use dew_core::precession::{classical_bound, score_state, Sigma};
use dew_core::witness::{
    coherent_expectation, coherent_expectation_auto, coherent_expectation_closed_form, nondecomposability_check,
    optimality_probe, witness_matrix,
};
use proptest::prelude::*;
use statrs::function::erf::erf;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn witness_complements_the_score(seed in any::<u64>(), half in 1usize..4, n_max in 1usize..7) {
        let k = 2 * half + 1;
        let mut r = rng(seed);
        let rho = random_two_mode(&mut r, n_max, 3, BasisTag::Normal);
        let w = witness_matrix(k, n_max).unwrap();
        let total = w.expectation(&rho).unwrap() + score_state(&rho, k, Sigma::Plus).unwrap();
        prop_assert!((total - classical_bound(k)).abs() <= 1e-10);
        // The full two-mode operator gives the same number.
        let direct = (w.operator.matrix() * rho.matrix()).trace().re;
        prop_assert!((direct - w.expectation(&rho).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn coherent_pairs_never_trigger_the_witness(r in 0.0f64..3.0) {
        let closed = coherent_expectation_closed_form(r);
        prop_assert!(closed > 0.0);
        prop_assert!(closed <= 1.0 / 6.0 + 1e-15);
        prop_assert!(closed <= (1.0 - erf(r)) / 3.0 + 1e-15);
    }
}

#[test]
fn explicit_coherent_values_match_the_closed_form() {
    for r in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0] {
        let (v, n) = coherent_expectation_auto(r).unwrap();
        let c = coherent_expectation_closed_form(r);
        assert!((v - c).abs() < 1e-10, "r={r} n={n}: {v} vs {c}");
    }
    // A larger box changes nothing once the tail is negligible.
    let (v, n) = coherent_expectation_auto(1.0).unwrap();
    assert!((coherent_expectation(1.0, n + 6).unwrap() - v).abs() < 1e-12);
    assert!((coherent_expectation_closed_form(1.0) - 0.0516528).abs() < 1e-6);
}

#[test]
fn nondecomposability_value_is_stable_in_the_parent() {
    // Parents of 4 or more contain every block the rotation mixes into the level-2 box.
    let reference = nondecomposability_check(3, 2, 4).unwrap();
    assert!((reference - 0.0608811198).abs() < 1e-9, "{reference}");
    for parent in 5..=8 {
        let v = nondecomposability_check(3, 2, parent).unwrap();
        assert!((v - reference).abs() < 1e-12, "parent {parent}: {v}");
    }
    // Smaller parents drop part of those blocks but keep the sign.
    assert!((nondecomposability_check(3, 2, 2).unwrap() - 1.0 / 6.0).abs() < 1e-12);
    assert!((nondecomposability_check(3, 2, 3).unwrap() - 0.0615276968).abs() < 1e-9);
}

#[test]
fn probe_finds_negative_directions() {
    let n = 30;
    let d = (n + 1) * (n + 1);
    let p = FockOperator::new(CMatrix::identity(d, d), n, BasisTag::Physical).unwrap();
    let mut last = f64::INFINITY;
    for eps in [0.01, 0.05, 0.1, 0.5] {
        let res = optimality_probe(&p, eps).unwrap();
        assert!(res.value < 0.0, "eps={eps}: {}", res.value);
        assert!(res.r_star <= last + 1e-12, "eps={eps}: r*={} after {last}", res.r_star);
        // Past the vacuum the search stops at the crossing (1 + eps) <W> = eps <P> with <P> = 1, up to the truncation of W.
        let crossing = (1.0 + eps) * coherent_expectation_closed_form(res.crossing) - eps;
        assert!(res.r_star == 0.0 || crossing.abs() < 1e-5, "eps={eps}: crossing at {} gives {crossing}", res.crossing);
        assert!(res.crossing <= res.r_star && res.r_star - res.crossing <= 0.05 + 1e-12);
        assert!((1.0 + eps) * coherent_expectation_closed_form(res.r_star) - eps < 0.0);
        last = res.r_star;
    }
}
