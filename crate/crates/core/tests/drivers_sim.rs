mod common;

use esme_core::drivers::{
    derive_seed, expected_sig_time_bm, monte_carlo_expected_words, rng_from_seed, DriverKind, DriverSampler,
    FbmGenerator,
};
use esme_core::simulate::Scheme;
use esme_core::{enumerate_words, WordSet};

use common::props;
use rayon::prelude::*;

#[test]
fn fbm_variance_cholesky() {
    props::fbm_variance(11.0 / 24.0, 250, 0.25, 10_000).unwrap();
}

#[test]
fn fbm_variance_circulant() {
    assert!(FbmGenerator::new(0.4, 2000, 1e-3).unwrap().uses_circulant());
    props::fbm_variance(11.0 / 24.0, 2000, 1.0, 10_000).unwrap();
    props::fbm_variance(0.75, 1500, 2.0, 10_000).unwrap();
}

#[test]
fn fbm_increments_are_stationary_with_the_right_covariance() {
    let (h, steps, dt) = (0.3, 64, 0.01);
    let g = FbmGenerator::new(h, steps, dt).unwrap();
    let n = 20_000u64;
    let sums: (f64, f64) = (0..n)
        .into_par_iter()
        .map(|k| {
            let x = g.sample_increments(&mut rng_from_seed(derive_seed(5, &[k])));
            (x[10] * x[11], x[40] * x[41])
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let want = 0.5 * dt.powf(2.0 * h) * (2f64.powf(2.0 * h) - 2.0);
    let se = dt.powf(2.0 * h) * (2.0 / n as f64).sqrt();
    assert!((sums.0 / n as f64 - want).abs() < 4.0 * se);
    assert!((sums.1 / n as f64 - want).abs() < 4.0 * se);
}

#[test]
fn monte_carlo_brownian_signature_matches_closed_form() {
    let sampler = DriverSampler::new(DriverKind::TimeBm, 0.25, 0.005).unwrap();
    let words = enumerate_words(2, 1, 4);
    let set = WordSet::new(2, words.iter()).unwrap();
    let mc = monte_carlo_expected_words(&sampler, &set, 4000, 17).unwrap();
    let exact = expected_sig_time_bm(0.25, 4);
    for w in &words {
        let (m, e) = (mc.value(w).unwrap(), exact.value(w).unwrap());
        let se = mc.std_error(w).unwrap();
        // Piecewise-linear paths are exact for the Stratonovich signature in law, up to sampling noise.
        assert!((m - e).abs() <= 4.5 * se + 1e-12, "{w}: {m} vs {e} (se {se})");
    }
}

#[test]
fn milstein_strong_order_is_one() {
    let order = props::self_convergence_order(Scheme::Milstein, DriverKind::TimeBm, 400);
    assert!((order - 1.0).abs() <= 0.2, "estimated order {order}");
}

#[test]
fn euler_is_slower_than_milstein() {
    let order = props::self_convergence_order(Scheme::Euler, DriverKind::TimeBm, 400);
    assert!((order - 0.5).abs() <= 0.2, "estimated order {order}");
}

#[test]
fn davie_converges_on_fractional_drivers() {
    let kind = DriverKind::Fbm { hurst: 11.0 / 24.0 };
    let order = props::self_convergence_order(Scheme::Davie, kind.clone(), 100);
    // Rate at least the guaranteed 3h - 1.
    assert!(order >= Scheme::Davie.error_order(&kind) - 0.1, "estimated order {order}");
}

#[test]
fn seeded_paths_are_reproducible() {
    let sampler = DriverSampler::new(DriverKind::Fbm { hurst: 0.4 }, 1.0, 0.01).unwrap();
    assert_eq!(sampler.sample_seeded(3, 7), sampler.sample_seeded(3, 7));
    assert_ne!(sampler.sample_seeded(3, 7), sampler.sample_seeded(3, 8));
    let p = sampler.sample_seeded(3, 7);
    assert_eq!(p.dimension(), 2);
    assert!((p.end()[0] - 1.0).abs() < 1e-12);
}
