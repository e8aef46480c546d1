//! Configuration-driven experiments: the full pipeline from a model
//! description to replicated estimates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drivers::{
    antithetic_row, augment_time_scales, derive_seed, empirical_expected_words, monte_carlo_expected_words,
    stream, summarise, DriverKind, DriverSampler, SymbolicTimeBm,
};
use crate::error::{Error, Result};
use crate::estimator::{
    build_system, empirical_moments, jacobian_d, normalize_estimates, sample_covariance, solve_system,
    EmpiricalMoments, EstimationProblem, Solution, SolveMode, SolveOptions,
};
use crate::picard::{
    lift_to_word, max_driver_word_len, picard_level1_anchored, DriverExpectation, PicardExpansion,
    VectorField,
};
use crate::signature::{SampledPath, WordSet};
use crate::simulate::{ResponseSimulator, Scheme};
use crate::words::{prefix_closure, Word};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub parameters: Vec<String>,
    pub state: Vec<String>,
    /// `field[j][i]`: state row `j`, driver channel `i` (channel 1 is time).
    pub field: Vec<Vec<String>>,
}

fn default_esig_paths() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverConfig {
    /// `(t, W)`: analytic expected signature, Milstein simulation.
    TimeBm,
    /// `(t, B^h)`: Monte Carlo expected signature, Davie simulation.
    Fbm {
        hurst: f64,
        #[serde(default = "default_esig_paths")]
        esig_paths: usize,
    },
    /// Driver paths `t,x1..` read from CSV files in `dir`; the expected
    /// signature is their empirical average.
    PathFiles {
        dir: PathBuf,
        #[serde(default)]
        hurst: Option<f64>,
    },
}

fn default_replications() -> usize {
    1
}
fn default_multistart() -> usize {
    17
}
fn default_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub driver: DriverConfig,
    #[serde(default)]
    pub theta_true: Option<Vec<f64>>,
    pub y0: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    #[serde(rename = "N")]
    pub paths: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub r: usize,
    #[serde(rename = "V")]
    pub words: Vec<String>,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SolveMode,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Parameters reported by absolute value when aggregating.
    #[serde(default)]
    pub canonicalize_sign: Vec<String>,
    /// Extra time-rescaled response copies `Y_{c t}` joined to the state.
    #[serde(default)]
    pub time_scales: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        })
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.words.is_empty() {
            return bad("V must list at least one word".into());
        }
        if self.words.len() < self.model.parameters.len() {
            return bad(format!(
                "V has {} words for {} parameters",
                self.words.len(),
                self.model.parameters.len()
            ));
        }
        if self.mode == SolveMode::Roots && self.words.len() != self.model.parameters.len() {
            return bad("root mode needs |V| equal to the number of parameters".into());
        }
        if self.bounds.len() != self.model.parameters.len() {
            return bad("box needs one interval per parameter".into());
        }
        if self.y0.len() != self.model.state.len() {
            return bad("y0 needs one value per state variable".into());
        }
        if let Some(t) = &self.theta_true {
            if t.len() != self.model.parameters.len() {
                return bad("theta_true needs one value per parameter".into());
            }
        }
        if !(self.horizon > 0.0) || !(self.dt > 0.0) || self.dt > self.horizon {
            return bad(format!("need 0 < dt ≤ T, got dt = {}, T = {}", self.dt, self.horizon));
        }
        if self.paths == 0 || self.replications == 0 {
            return bad("N and replications must be positive".into());
        }
        if !(self.tol > 0.0) || self.multistart == 0 {
            return bad("tol must be positive and multistart ≥ 1".into());
        }
        for name in &self.canonicalize_sign {
            if !self.model.parameters.contains(name) {
                return bad(format!("canonicalize_sign names unknown parameter `{name}`"));
            }
        }
        if self.time_scales.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return bad("time scales must be positive".into());
        }
        match &self.driver {
            DriverConfig::Fbm { hurst, esig_paths } => {
                if !(*hurst > 0.25 && *hurst <= 1.0) {
                    return bad(format!("Hurst index {hurst} outside (1/4, 1]"));
                }
                if *esig_paths == 0 {
                    return bad("esig_paths must be positive".into());
                }
            }
            DriverConfig::PathFiles { hurst: Some(h), .. } if !(*h > 0.25 && *h <= 1.0) => {
                return bad(format!("Hurst index {h} outside (1/4, 1]"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn driver_kind(&self) -> DriverKind {
        match &self.driver {
            DriverConfig::TimeBm => DriverKind::TimeBm,
            DriverConfig::Fbm { hurst, .. } => DriverKind::Fbm { hurst: *hurst },
            DriverConfig::PathFiles { hurst, .. } => match hurst {
                Some(h) if *h != 0.5 => DriverKind::Fbm { hurst: *h },
                _ => DriverKind::TimeBm,
            },
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme.unwrap_or_else(|| Scheme::default_for(&self.driver_kind()))
    }
}

/// A validated experiment with its parsed model.
pub struct Experiment {
    config: ExperimentConfig,
    base_dir: PathBuf,
    base_field: VectorField,
    field: VectorField,
    words: Vec<Word>,
    hash: String,
}

/// Per-replication outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    pub status: String,
    pub roots: Vec<Vec<f64>>,
    /// Representative estimate after sign canonicalisation.
    pub estimate: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub normalized: Option<Vec<f64>>,
    #[serde(skip)]
    pub moments: Option<EmpiricalMoments>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub config_hash: String,
    pub parameters: Vec<String>,
    pub replications: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub root_counts: BTreeMap<usize, usize>,
    pub mean_estimate: Option<Vec<f64>>,
    pub median_abs_error: Option<Vec<f64>>,
    /// Pooled per-path covariance of the moment words.
    pub sigma: Option<Vec<Vec<f64>>>,
    pub d_at_truth: Option<Vec<Vec<f64>>>,
    pub normalized_mean: Option<Vec<f64>>,
    pub normalized_covariance: Option<Vec<Vec<f64>>>,
}

impl Experiment {
    /// `base_dir` resolves relative paths in the config.
    pub fn new(config: ExperimentConfig, base_dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let m = &config.model;
        let base_field = VectorField::parse(&m.parameters, &m.state, &m.field)?;
        if base_field.driver_dim() < 1 {
            return Err(Error::InvalidConfig("field needs a time channel".into()));
        }
        if !matches!(config.driver, DriverConfig::PathFiles { .. }) && base_field.driver_dim() != 2 {
            return Err(Error::InvalidConfig(format!(
                "{} drivers have two channels (time, noise), the field has {}",
                config.driver_kind().name(),
                base_field.driver_dim()
            )));
        }
        config.scheme().check(&config.driver_kind())?;
        let field = if config.time_scales.is_empty() {
            base_field.clone()
        } else {
            base_field.block_diagonal(1 + config.time_scales.len())?
        };
        let words = config
            .words
            .iter()
            .map(|w| Word::parse(w, field.state_dim()))
            .collect::<Result<Vec<_>>>()?;
        if words.iter().any(Word::is_empty) {
            return Err(Error::InvalidConfig("V must not contain the empty word".into()));
        }
        let hash = config.hash();
        Ok(Self {
            config,
            base_dir: base_dir.into(),
            base_field,
            field,
            words,
            hash,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    fn augmented(&self) -> bool {
        !self.config.time_scales.is_empty()
    }

    /// Initial value of the (possibly augmented) state.
    pub fn y0(&self) -> Vec<f64> {
        let copies = 1 + self.config.time_scales.len();
        self.config.y0.iter().copied().cycle().take(self.config.y0.len() * copies).collect()
    }

    /// One expansion per word in V, anchored at `y0`.
    pub fn expansions(&self) -> Result<Vec<PicardExpansion>> {
        let level1 = picard_level1_anchored(&self.field, self.config.r, &self.y0())?;
        self.words.par_iter().map(|w| lift_to_word(&level1, w)).collect()
    }

    /// Longest driver word the expansions can reference.
    pub fn max_driver_level(&self) -> usize {
        let longest = self.words.iter().map(Word::len).max().unwrap_or(0);
        max_driver_word_len(longest, self.field.q(), self.config.r)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Driver paths listed in a `path_files` directory, sorted by name.
    pub fn driver_files(&self) -> Result<Vec<SampledPath>> {
        let DriverConfig::PathFiles { dir, .. } = &self.config.driver else {
            return Err(Error::InvalidConfig("driver is not path_files".into()));
        };
        let dir = self.resolve(dir);
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Empty("driver path directory"));
        }
        files.iter().map(SampledPath::read_csv).collect()
    }

    /// Horizon the raw driver must cover (the largest time scale times T).
    fn raw_horizon(&self) -> f64 {
        let c = self.config.time_scales.iter().copied().fold(1.0, f64::max);
        c * self.config.horizon
    }

    fn sampler(&self) -> Result<DriverSampler> {
        let horizon = self.raw_horizon();
        DriverSampler::new(self.config.driver_kind(), horizon, self.config.dt.min(horizon))
    }

    fn augment(&self, path: &SampledPath) -> Result<SampledPath> {
        if self.augmented() {
            augment_time_scales(path, self.config.horizon, &self.config.time_scales)
        } else {
            Ok(path.clone())
        }
    }

    /// Driver expectation used by the moment equations: exact for `(t, W)`,
    /// Monte Carlo over the expansion words otherwise.
    pub fn driver_expectation(&self, expansions: &[PicardExpansion]) -> Result<Box<dyn DriverExpectation + Send + Sync>> {
        let n = self.field.driver_dim();
        if matches!(self.config.driver, DriverConfig::TimeBm) && !self.augmented() {
            return Ok(Box::new(SymbolicTimeBm::at_horizon(n, self.config.horizon)?));
        }
        let support: Vec<Word> = expansions
            .iter()
            .flat_map(|e| e.coefficients().keys().cloned())
            .collect();
        let closure = prefix_closure(support.iter());
        let set = WordSet::new(n, closure.iter())?;
        let esig = match &self.config.driver {
            DriverConfig::PathFiles { .. } => {
                let paths = self
                    .driver_files()?
                    .iter()
                    .map(|p| self.augment(p))
                    .collect::<Result<Vec<_>>>()?;
                empirical_expected_words(&paths, &set)?
            }
            DriverConfig::TimeBm | DriverConfig::Fbm { .. } => {
                let num_paths = match &self.config.driver {
                    DriverConfig::Fbm { esig_paths, .. } => *esig_paths,
                    _ => 1000,
                };
                let sampler = self.sampler()?;
                let seed = derive_seed(self.config.seed, &[stream::DRIVER_ESIG]);
                if self.augmented() {
                    let rows: Vec<Vec<f64>> = (0..num_paths as u64)
                        .into_par_iter()
                        .map(|k| antithetic_row(&sampler.sample_seeded(seed, k), &set, |p| self.augment(p)))
                        .collect::<Result<_>>()?;
                    summarise(n, set.max_len(), self.config.horizon, set.words(), &rows)
                        .with_seed(seed)
                        .mark_antithetic()
                } else {
                    monte_carlo_expected_words(&sampler, &set, num_paths, seed)?
                }
            }
        };
        Ok(Box::new(esig))
    }

    /// Moment equations with the given targets.
    pub fn system(
        &self,
        expansions: &[PicardExpansion],
        driver: &dyn DriverExpectation,
        targets: &[f64],
        sample_size: Option<usize>,
    ) -> Result<EstimationProblem> {
        build_system(expansions, driver, targets, &self.y0(), sample_size)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            bounds: self.config.bounds.clone(),
            multistart: self.config.multistart,
            tol: self.config.tol,
            mode: self.config.mode,
            max_iter: 100,
        }
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        derive_seed(self.config.seed, &[stream::REPLICATION, replication as u64])
    }

    /// Response paths of one replication (requires `theta_true`).
    pub fn simulate_replication(&self, replication: usize) -> Result<Vec<SampledPath>> {
        let theta = self
            .config
            .theta_true
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("simulation needs theta_true".into()))?;
        let kind = self.config.driver_kind();
        let simulator = ResponseSimulator::new(&self.base_field, theta, self.config.scheme(), &kind)?;
        let n = self.config.paths;
        let drivers: Vec<SampledPath> = match &self.config.driver {
            DriverConfig::PathFiles { .. } => {
                let files = self.driver_files()?;
                let needed = n * self.config.replications;
                if files.len() < needed {
                    return Err(Error::InvalidConfig(format!(
                        "{} driver files for {} paths × {} replications",
                        files.len(),
                        n,
                        self.config.replications
                    )));
                }
                files[replication * n..(replication + 1) * n].to_vec()
            }
            _ => {
                let sampler = self.sampler()?;
                let seed = self.replication_seed(replication);
                (0..n as u64).map(|k| sampler.sample_seeded(seed, k)).collect()
            }
        };
        drivers
            .par_iter()
            .map(|d| {
                let y = simulator.simulate(&self.config.y0, d)?;
                self.augment(&y)
            })
            .collect()
    }

    /// Moments, system and solutions for one set of response paths.
    pub fn estimate(
        &self,
        responses: &[SampledPath],
        expansions: &[PicardExpansion],
        driver: &dyn DriverExpectation,
    ) -> Result<(EmpiricalMoments, EstimationProblem, Vec<Solution>)> {
        let level = self.words.iter().map(Word::len).max().unwrap_or(0);
        let moments = empirical_moments(responses, &self.words, level)?;
        let problem = self.system(expansions, driver, &moments.means, Some(responses.len()))?;
        let solutions = solve_system(&problem, &self.solve_options())?;
        Ok((moments, problem, solutions))
    }

    fn sign_indices(&self) -> Vec<usize> {
        self.config
            .canonicalize_sign
            .iter()
            .filter_map(|n| self.config.model.parameters.iter().position(|p| p == n))
            .collect()
    }

    /// Canonical representative of the root set: signs folded, duplicates
    /// dropped, then the smallest residual.
    pub fn representative(&self, solutions: &[Solution]) -> Option<(Vec<f64>, f64)> {
        let idx = self.sign_indices();
        solutions
            .iter()
            .map(|s| (crate::estimator::canonicalize_sign(&s.theta, &idx), s.residual))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    }

    /// Runs every replication in parallel and summarises. Rows are in
    /// replication order regardless of scheduling.
    pub fn replicate(&self) -> Result<(Vec<ReplicationRow>, ReplicationSummary)> {
        let expansions = self.expansions()?;
        let driver = self.driver_expectation(&expansions)?;
        let mut rows: Vec<ReplicationRow> = (0..self.config.replications)
            .into_par_iter()
            .map(|rep| self.run_replication(rep, &expansions, driver.as_ref()))
            .collect();
        let summary = self.summarise(&mut rows, &expansions, driver.as_ref())?;
        Ok((rows, summary))
    }

    pub fn run_replication(
        &self,
        rep: usize,
        expansions: &[PicardExpansion],
        driver: &(dyn DriverExpectation + Send + Sync),
    ) -> ReplicationRow {
        let seed = self.replication_seed(rep);
        let mut row = ReplicationRow {
            replication: rep,
            seed,
            status: "ok".into(),
            roots: Vec::new(),
            estimate: None,
            residual: None,
            normalized: None,
            moments: None,
        };
        let outcome = self
            .simulate_replication(rep)
            .and_then(|paths| self.estimate(&paths, expansions, driver));
        match outcome {
            Ok((moments, _, solutions)) => {
                row.roots = solutions.iter().map(|s| s.theta.clone()).collect();
                row.moments = Some(moments);
                match self.representative(&solutions) {
                    Some((theta, residual)) => {
                        row.estimate = Some(theta);
                        row.residual = Some(residual);
                    }
                    None => row.status = "no_solution".into(),
                }
            }
            Err(e) => row.status = format!("error: {e}"),
        }
        row
    }

    /// Pooled Σ, D at the truth and normalized estimates for the rows that
    /// succeeded; failed rows are counted and left out.
    pub fn summarise(
        &self,
        rows: &mut [ReplicationRow],
        expansions: &[PicardExpansion],
        driver: &dyn DriverExpectation,
    ) -> Result<ReplicationSummary> {
        let d = self.config.model.parameters.len();
        let mut root_counts = BTreeMap::new();
        for r in rows.iter() {
            if r.moments.is_some() {
                *root_counts.entry(r.roots.len()).or_insert(0) += 1;
            }
        }
        let ok: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].status == "ok").collect();
        let mut summary = ReplicationSummary {
            config_hash: self.hash.clone(),
            parameters: self.config.model.parameters.clone(),
            replications: rows.len(),
            succeeded: ok.len(),
            failed: rows.len() - ok.len(),
            root_counts,
            mean_estimate: None,
            median_abs_error: None,
            sigma: None,
            d_at_truth: None,
            normalized_mean: None,
            normalized_covariance: None,
        };
        if ok.is_empty() {
            return Ok(summary);
        }
        let estimates: Vec<Vec<f64>> = ok.iter().map(|&i| rows[i].estimate.clone().unwrap_or_default()).collect();
        summary.mean_estimate = Some((0..d).map(|k| estimates.iter().map(|e| e[k]).sum::<f64>() / estimates.len() as f64).collect());
        let batches: Vec<EmpiricalMoments> = ok.iter().filter_map(|&i| rows[i].moments.clone()).collect();
        let pooled = EmpiricalMoments::pooled(&batches)?;
        let sigma = sample_covariance(&pooled.per_path)?;
        summary.sigma = Some(rows_of(&sigma));
        let Some(theta_true) = &self.config.theta_true else {
            return Ok(summary);
        };
        let truth = crate::estimator::canonicalize_sign(theta_true, &self.sign_indices());
        summary.median_abs_error = Some(
            (0..d)
                .map(|k| median(estimates.iter().map(|e| (e[k] - truth[k]).abs()).collect()))
                .collect(),
        );
        let problem = self.system(expansions, driver, &pooled.means, Some(self.config.paths))?;
        let dmat = jacobian_d(&problem, &truth)?;
        summary.d_at_truth = Some(rows_of(&dmat));
        let normalized = normalize_estimates(&estimates, &truth, &dmat, &sigma, self.config.paths)?;
        for (&i, z) in ok.iter().zip(&normalized) {
            rows[i].normalized = Some(z.clone());
        }
        summary.normalized_mean =
            Some((0..d).map(|k| normalized.iter().map(|z| z[k]).sum::<f64>() / normalized.len() as f64).collect());
        if normalized.len() >= 2 {
            summary.normalized_covariance = Some(rows_of(&sample_covariance(&normalized)?));
        }
        Ok(summary)
    }

    /// Exact theoretical moments `E^τ_r(θ)`.
    pub fn theoretical_moments(
        &self,
        expansions: &[PicardExpansion],
        driver: &dyn DriverExpectation,
        theta: &[f64],
    ) -> Result<Vec<f64>> {
        let zeros = vec![0.0; self.words.len()];
        Ok(self.system(expansions, driver, &zeros, None)?.moments(theta))
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// The diffusion example `dY = a(1-Y) dt + b Y² ∘ dW` at full scale.
pub fn diffusion_example() -> ExperimentConfig {
    ExperimentConfig {
        model: ModelConfig {
            parameters: vec!["a".into(), "b".into()],
            state: vec!["y".into()],
            field: vec![vec!["a*(1-y)".into(), "b*y^2".into()]],
        },
        driver: DriverConfig::TimeBm,
        theta_true: Some(vec![1.0, 2.0]),
        y0: vec![0.0],
        horizon: 0.25,
        dt: 1e-3,
        paths: 2000,
        replications: 100,
        r: 3,
        words: vec!["(1)".into(), "(1,1)".into()],
        bounds: vec![[0.05, 4.0], [-5.0, 5.0]],
        seed: 20_240_601,
        mode: SolveMode::Roots,
        scheme: None,
        multistart: 17,
        tol: 1e-10,
        canonicalize_sign: vec!["b".into()],
        time_scales: Vec::new(),
    }
}

/// The same model driven by `(t, B^h)` with `h = 11/24`.
pub fn fbm_example() -> ExperimentConfig {
    ExperimentConfig {
        driver: DriverConfig::Fbm {
            hurst: 11.0 / 24.0,
            esig_paths: 1000,
        },
        ..diffusion_example()
    }
}
