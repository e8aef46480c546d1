mod common;

use std::collections::BTreeMap;

use esme_core::drivers::{expected_sig_time_bm, Provenance};
use esme_core::picard::{max_driver_word_len, numeric_picard_iterate};
use esme_core::{
    expected_response_signature, path_signature, picard_level1_anchored, ExpectedSignature, VectorField, Word,
    WordSet,
};
use proptest::prelude::*;

use common::{field_spec, points, polyline, props, refine};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn degree_bounds_hold(spec in field_spec(), r in 0usize..=3, tau_len in 1usize..=2, seed in any::<u64>()) {
        props::degree_bounds(spec, r, tau_len, seed)?;
    }

    #[test]
    fn expansion_matches_numeric_picard(
        spec in field_spec(),
        r in 1usize..=3,
        y0 in prop::collection::vec(-0.5f64..0.5, 2),
        pts in points(2, 1..=3, 0.4),
    ) {
        props::oracle_equivalence(spec, r, y0, pts)?;
    }

    #[test]
    fn expected_signature_is_linear_in_the_driver(lambda in -2.0f64..2.0, mu in -2.0f64..2.0, s in 0.1f64..1.0, t in 0.1f64..1.0) {
        let vf = VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap();
        let level1 = picard_level1_anchored(&vf, 2, &[0.0]).unwrap();
        let level = max_driver_word_len(1, 2, 2);
        let (e1, e2) = (expected_sig_time_bm(s, level), expected_sig_time_bm(t, level));
        let combined: BTreeMap<Word, f64> = e1
            .values()
            .iter()
            .map(|(w, v)| (w.clone(), lambda * v + mu * e2.values()[w]))
            .collect();
        let mixed = ExpectedSignature::new(2, 1.0, combined, Provenance::Analytic).unwrap();
        let p = |e: &ExpectedSignature| expected_response_signature(&level1[0], e).unwrap();
        let (p1, p2, pm) = (p(&e1), p(&e2), p(&mixed));
        for theta in [[1.0, 2.0], [0.3, -1.5]] {
            let lhs = pm.eval(&theta);
            let rhs = lambda * p1.eval(&theta) + mu * p2.eval(&theta);
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn jacobian_matches_central_differences(a in 0.2f64..3.0, b in -4.0f64..4.0) {
        props::jacobian_fd(a, b)?;
    }
}

fn picard_errors(field: &[&str], max_r: usize) -> Vec<f64> {
    let vf = VectorField::parse(&["a", "b"], &["y"], &[field.to_vec()]).unwrap();
    let theta = [1.0, 2.0];
    let driver = polyline(&[vec![0.0, 0.0], vec![0.1, 0.15], vec![0.2, 0.05], vec![0.25, -0.1]]);
    let limit = numeric_picard_iterate(&vf, &theta, &[0.2], &refine(&driver, 400), 40).unwrap().end()[0];
    (1..=max_r)
        .map(|r| {
            let level1 = picard_level1_anchored(&vf, r, &[0.2]).unwrap();
            let set = WordSet::new(2, level1[0].coefficients().keys()).unwrap();
            let sig = set.signature(&driver).unwrap();
            (level1[0].evaluate_on_words(&sig, &theta).unwrap() - limit).abs() / limit.abs()
        })
        .collect()
}

#[test]
fn picard_iterates_converge_to_the_ode_solution() {
    for (field, max_r, final_tol) in [(["a*(1-y)", "b*y"], 5, 1e-3), (["a*(1-y)", "b*y^2"], 3, 5e-2)] {
        let errors = picard_errors(&field, max_r);
        for pair in errors.windows(2) {
            assert!(pair[1] < pair[0], "{field:?}: {errors:?}");
        }
        assert!(errors[max_r - 1] < final_tol, "{field:?}: {errors:?}");
    }
}

#[test]
fn constant_and_linear_fields_have_closed_forms() {
    // y' = p y along time: Y(r) = y0 Σ_{k=1..r} (p t)^k / k!.
    let vf = VectorField::parse(&["p"], &["y"], &[vec!["p*y"]]).unwrap();
    let level1 = picard_level1_anchored(&vf, 4, &[1.0]).unwrap();
    let path = polyline(&[vec![0.0], vec![0.5]]);
    let sig = path_signature(&path, 4);
    let got = level1[0].evaluate_on(&sig, &[2.0]).unwrap();
    let want: f64 = (1..=4).map(|k| 1f64.powi(k) / (1..=k).map(f64::from).product::<f64>()).sum();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}
