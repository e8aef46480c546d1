//! Property bodies shared by the proptest suites and the acceptance run.

use esme_core::drivers::{derive_seed, expected_sig_time_bm, rng_from_seed, DriverKind, DriverSampler, FbmGenerator};
use esme_core::estimator::{jacobian_d, EstimationProblem};
use esme_core::picard::{max_driver_word_len, numeric_picard_iterate};
use esme_core::simulate::{ResponseSimulator, Scheme};
use esme_core::{
    chen_concat, expected_response_signature, lift_to_word, path_signature, picard_level1, picard_level1_anchored,
    shuffle, MultiPoly, SampledPath, Vars, VectorField, Word,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rayon::prelude::*;

use super::{polyline, refine, FieldSpec};

pub type Check = Result<(), TestCaseError>;

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

pub fn word(n: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(1..=n, 0..=5).prop_map(move |l| Word::new(&l, n).unwrap())
}

pub fn word_pair() -> impl Strategy<Value = (Word, Word)> {
    (1usize..=3).prop_flat_map(|n| (word(n), word(n)))
}

pub fn shuffle_cardinality((a, b): (Word, Word)) -> Check {
    let s = shuffle(&a, &b).unwrap();
    let (p, q) = (a.len() as u64, b.len() as u64);
    prop_assert_eq!(s.total(), binomial(p + q, p));
    for (w, _) in s.iter() {
        prop_assert_eq!(w.len(), a.len() + b.len());
    }
    Ok(())
}

pub fn chen_split(pts: Vec<Vec<f64>>, level: usize, cut: f64) -> Check {
    let path = polyline(&pts);
    let k = 1 + ((path.len() - 2) as f64 * cut) as usize;
    let whole = path_signature(&path, level);
    let left = path_signature(&path.slice(0, k).unwrap(), level);
    let right = path_signature(&path.slice(k, path.len() - 1).unwrap(), level);
    let err = whole.max_abs_diff(&chen_concat(&left, &right).unwrap());
    prop_assert!(err < 1e-12, "Chen identity off by {}", err);
    Ok(())
}

pub fn shuffle_relation(pts: Vec<Vec<f64>>, (a, b): (Word, Word)) -> Check {
    let sig = path_signature(&polyline(&pts), a.len() + b.len());
    let lhs = sig.entry(&a).unwrap() * sig.entry(&b).unwrap();
    let rhs: f64 = shuffle(&a, &b)
        .unwrap()
        .iter()
        .map(|(w, k)| k as f64 * sig.entry(w).unwrap())
        .sum();
    prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    Ok(())
}

pub fn degree_bounds(spec: FieldSpec, r: usize, tau_len: usize, seed: u64) -> Check {
    let vf = spec.field();
    // Lifting to |τ| = 2 after three steps of a coupled quadratic field is slow.
    let tau_len = if r == 3 { 1 } else { tau_len };
    let letters: Vec<usize> = (0..tau_len).map(|k| 1 + ((seed >> k) as usize % spec.m)).collect();
    let tau = Word::new(&letters, spec.m).unwrap();
    let bound = max_driver_word_len(tau_len, vf.q(), r);
    let anchored = lift_to_word(&picard_level1_anchored(&vf, r, &vec![0.5; spec.m]).unwrap(), &tau).unwrap();
    for sigma in anchored.coefficients().keys() {
        prop_assert!(sigma.len() <= bound, "{} longer than {}", sigma, bound);
    }
    // With the anchor symbolic, coefficients have degree ≤ |τ| q^r in y0.
    if r <= 2 {
        let symbolic = lift_to_word(&picard_level1(&vf, r).unwrap(), &tau).unwrap();
        let y0_bound = if r == 0 { 0 } else { tau_len as u32 * vf.q().pow(r as u32) };
        prop_assert!(symbolic.y0_degree() <= y0_bound, "y0 degree {} > {}", symbolic.y0_degree(), y0_bound);
        prop_assert!(symbolic.max_word_len() <= bound);
    }
    Ok(())
}

/// Symbolic `Y(r)` on the exact polyline signature against quadrature.
pub fn oracle_equivalence(spec: FieldSpec, r: usize, y0: Vec<f64>, pts: Vec<Vec<f64>>) -> Check {
    let vf = spec.field();
    let y0 = &y0[..spec.m];
    let pts: Vec<Vec<f64>> = pts.iter().map(|p| p[..spec.n].to_vec()).collect();
    let driver = polyline(&pts);
    let theta = [0.7];
    let level1 = picard_level1_anchored(&vf, r, y0).unwrap();
    let sig = path_signature(&driver, max_driver_word_len(1, vf.q(), r).max(1));
    let numeric = numeric_picard_iterate(&vf, &theta, y0, &refine(&driver, 2000), r).unwrap();
    for (j, expansion) in level1.iter().enumerate() {
        let symbolic = expansion.evaluate_on(&sig, &theta).unwrap();
        let reference = numeric.end()[j];
        prop_assert!(
            (symbolic - reference).abs() <= 1e-6 * reference.abs().max(1.0),
            "state {}: {} vs {}",
            j,
            symbolic,
            reference
        );
    }
    Ok(())
}

pub fn jacobian_fd(a: f64, b: f64) -> Check {
    let vf = VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap();
    let level1 = picard_level1_anchored(&vf, 3, &[0.0]).unwrap();
    let driver = expected_sig_time_bm(0.25, 14);
    let words: Vec<Word> = ["(1)", "(1,1)"].iter().map(|w| Word::parse(w, 1).unwrap()).collect();
    let equations: Vec<MultiPoly> = words
        .iter()
        .map(|w| expected_response_signature(&lift_to_word(&level1, w).unwrap(), &driver).unwrap())
        .collect();
    let vars = Vars::new(&["a", "b"]).unwrap();
    let problem = EstimationProblem::new(vars, words, equations, vec![0.0, 0.0], 3, None).unwrap();
    let d = jacobian_d(&problem, &[a, b]).unwrap();
    let h = 1e-5;
    for i in 0..2 {
        let (mut up, mut down) = ([a, b], [a, b]);
        up[i] += h;
        down[i] -= h;
        let (mu, md) = (problem.moments(&up), problem.moments(&down));
        for col in 0..2 {
            let fd = (mu[col] - md[col]) / (2.0 * h);
            prop_assert!((d[(i, col)] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{} vs {}", d[(i, col)], fd);
        }
    }
    Ok(())
}

pub fn semigroup(s: f64, t: f64, level: usize) -> Check {
    let es = expected_sig_time_bm(s, level).to_dense().unwrap();
    let et = expected_sig_time_bm(t, level).to_dense().unwrap();
    let total = expected_sig_time_bm(s + t, level).to_dense().unwrap();
    prop_assert!(total.max_abs_diff(&chen_concat(&es, &et).unwrap()) < 1e-12);
    Ok(())
}

/// Checks `Var B^h_t = t^{2h}` at the end point and the midpoint.
pub fn fbm_variance(hurst: f64, steps: usize, horizon: f64, paths: u64) -> Result<(), String> {
    let g = FbmGenerator::new(hurst, steps, horizon / steps as f64).map_err(|e| e.to_string())?;
    let draws: Vec<(f64, f64)> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let p = g.sample_path(&mut rng_from_seed(derive_seed(99, &[k])));
            (p[steps], p[steps / 2])
        })
        .collect();
    let n = paths as f64;
    let mid = horizon * (steps / 2) as f64 / steps as f64;
    for (pick, t) in [(0usize, horizon), (1, mid)] {
        let want = t.powf(2.0 * hurst);
        let var = draws.iter().map(|d| if pick == 0 { d.0 * d.0 } else { d.1 * d.1 }).sum::<f64>() / n;
        // Var of the sample second moment of a centred Gaussian: 2σ⁴/n.
        let se = want * (2.0 / n).sqrt();
        if (var - want).abs() >= 3.0 * se {
            return Err(format!("h={hurst} t={t}: variance {var} vs {want} (se {se})"));
        }
    }
    Ok(())
}

fn subsample(path: &SampledPath, every: usize) -> SampledPath {
    let idx: Vec<usize> = (0..path.len()).step_by(every).collect();
    SampledPath::new(
        idx.iter().map(|&k| path.times()[k]).collect(),
        idx.iter().map(|&k| path.values()[k].clone()).collect(),
    )
    .unwrap()
}

/// Slope of log E|Y_h(T) - Y_fine(T)| against log h over coarsenings of
/// one fine driver grid.
pub fn self_convergence_order(scheme: Scheme, kind: DriverKind, paths: u64) -> f64 {
    let vf = VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap();
    let (theta, y0) = ([1.0, 0.8], 0.5);
    let fine_steps = 1 << 12;
    let horizon = 0.25;
    let sampler = DriverSampler::new(kind.clone(), horizon, horizon / fine_steps as f64).unwrap();
    let sim = ResponseSimulator::new(&vf, &theta, scheme, &kind).unwrap();
    let levels = [3usize, 4, 5, 6, 7];
    let errors: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let driver = sampler.sample_seeded(42, k);
            let reference = sim.simulate(&[y0], &driver).unwrap().end()[0];
            levels
                .iter()
                .map(|&l| (sim.simulate(&[y0], &subsample(&driver, 1 << l)).unwrap().end()[0] - reference).abs())
                .collect::<Vec<f64>>()
        })
        .reduce(|| vec![0.0; levels.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let xs: Vec<f64> = levels.iter().map(|&l| (l as f64) * 2f64.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| (e / paths as f64).ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
