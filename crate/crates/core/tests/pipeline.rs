use esme_core::drivers::{DriverKind, DriverSampler};
use esme_core::estimator::solve_system;
use esme_core::experiment::{diffusion_example, fbm_example, DriverConfig, Experiment, ExperimentConfig};

fn exact_roots(config: ExperimentConfig) -> Vec<Vec<f64>> {
    let theta = config.theta_true.clone().unwrap();
    let e = Experiment::new(config, ".").unwrap();
    let exps = e.expansions().unwrap();
    let driver = e.driver_expectation(&exps).unwrap();
    let targets = e.theoretical_moments(&exps, driver.as_ref(), &theta).unwrap();
    let problem = e.system(&exps, driver.as_ref(), &targets, None).unwrap();
    solve_system(&problem, &e.solve_options()).unwrap().into_iter().map(|s| s.theta).collect()
}

fn assert_recovers(roots: &[Vec<f64>], tol: f64) {
    assert_eq!(roots.len(), 2, "{roots:?}");
    for t in roots {
        assert!((t[0] - 1.0).abs() < tol && (t[1].abs() - 2.0).abs() < tol, "{roots:?}");
    }
    assert!(roots[0][1] * roots[1][1] < 0.0);
}

#[test]
fn fbm_exact_targets_recover_truth() {
    let mut c = fbm_example();
    c.driver = DriverConfig::Fbm {
        hurst: 11.0 / 24.0,
        esig_paths: 200,
    };
    assert_recovers(&exact_roots(c), 1e-8);
}

#[test]
fn time_scale_augmentation_identifies_from_first_moments() {
    let mut c = diffusion_example();
    c.time_scales = vec![0.5];
    c.words = vec!["(1)".into(), "(2)".into()];
    c.driver = DriverConfig::Fbm {
        hurst: 0.5,
        esig_paths: 200,
    };
    // First moments at T and T/2 only see b², so the sign stays ambiguous.
    assert_recovers(&exact_roots(c), 1e-8);
}

#[test]
fn replications_are_deterministic() {
    let mut c = diffusion_example();
    c.paths = 100;
    c.dt = 5e-3;
    c.replications = 3;
    let e = Experiment::new(c.clone(), ".").unwrap();
    let (rows, summary) = e.replicate().unwrap();
    let (again, summary2) = Experiment::new(c, ".").unwrap().replicate().unwrap();
    assert_eq!(rows, again);
    assert_eq!(summary, summary2);
    assert_eq!(summary.succeeded + summary.failed, 3);
    assert!(rows.iter().all(|r| r.status == "ok" && r.roots.len() == 2));
    assert!(summary.normalized_covariance.is_some());
}

#[test]
fn driver_files_feed_simulation_and_expected_signature() {
    let base = tempfile::tempdir().unwrap();
    let dir = base.path().join("drivers");
    std::fs::create_dir(&dir).unwrap();
    let sampler = DriverSampler::new(DriverKind::TimeBm, 0.25, 5e-3).unwrap();
    for k in 0..120u64 {
        let path = sampler.sample_seeded(5, k);
        path.write_csv(dir.join(format!("drv-{k:04}.csv")), None).unwrap();
    }
    let mut c = diffusion_example();
    c.driver = DriverConfig::PathFiles {
        dir: "drivers".into(),
        hurst: None,
    };
    c.paths = 60;
    c.replications = 2;
    c.dt = 5e-3;
    let e = Experiment::new(c.clone(), base.path()).unwrap();
    assert_eq!(e.driver_files().unwrap().len(), 120);
    let (rows, summary) = e.replicate().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(summary.succeeded, 2, "{rows:?}");

    c.paths = 100;
    let e = Experiment::new(c, base.path()).unwrap();
    assert!(e.simulate_replication(1).is_err(), "needs N × replications files");
}
