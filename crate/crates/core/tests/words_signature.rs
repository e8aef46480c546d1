mod common;

use esme_core::drivers::expected_sig_time_bm;
use esme_core::{enumerate_words, path_signature, shuffle, SampledPath, Word, WordSet};
use proptest::prelude::*;

use common::points;
use common::props::{self, word, word_pair};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffle_cardinality_is_binomial(pair in word_pair()) {
        props::shuffle_cardinality(pair)?;
    }

    #[test]
    fn shuffle_is_commutative((a, b) in word_pair()) {
        prop_assert_eq!(shuffle(&a, &b).unwrap(), shuffle(&b, &a).unwrap());
    }

    #[test]
    fn chen_split_identity(pts in points(3, 2..=12, 1.0), level in 1usize..=4, cut in 0.0f64..1.0) {
        props::chen_split(pts, level, cut)?;
    }

    #[test]
    fn shuffle_relation_on_signatures(pts in points(2, 1..=8, 1.0), pair in (word(2), word(2))) {
        props::shuffle_relation(pts, pair)?;
    }

    #[test]
    fn sparse_and_dense_signatures_agree(pts in points(2, 1..=8, 1.0)) {
        let path = common::polyline(&pts);
        let dense = path_signature(&path, 4);
        let words = enumerate_words(2, 3, 4);
        let sparse = WordSet::new(2, words.iter()).unwrap().signature(&path).unwrap();
        for w in &words {
            prop_assert!((dense.entry(w).unwrap() - sparse.entry(w).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn time_bm_semigroup(s in 0.01f64..2.0, t in 0.01f64..2.0, level in 1usize..=6) {
        props::semigroup(s, t, level)?;
    }

    #[test]
    fn csv_round_trip(pts in points(2, 1..=6, 10.0)) {
        let path = common::polyline(&pts);
        let text = path.to_csv_string(Some("note"));
        prop_assert_eq!(SampledPath::from_csv_str(&text, "mem").unwrap(), path);
    }
}

#[test]
fn time_bm_reference_values() {
    let e = expected_sig_time_bm(0.25, 4);
    let w = |l: &[usize]| Word::new(l, 2).unwrap();
    assert_eq!(e.value(&w(&[2])).unwrap(), 0.0);
    assert_eq!(e.value(&w(&[2, 2])).unwrap(), 0.125);
    assert_eq!(e.value(&w(&[1, 1])).unwrap(), 0.03125);
    assert_eq!(e.value(&w(&[1, 2, 2])).unwrap(), 0.25 * 0.25 / 2.0 / 2.0);
    assert_eq!(e.value(&w(&[2, 1, 2])).unwrap(), 0.0);
    assert_eq!(e.value(&w(&[2, 2, 2, 2])).unwrap(), 0.25 * 0.25 / 2.0 / 4.0);
}
