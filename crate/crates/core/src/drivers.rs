//! Driver laws: expected signatures, Brownian and fractional Brownian
//! samplers, and the seeding scheme shared by every Monte Carlo routine.
//!
//! Multi-channel drivers always carry time in channel 1.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::picard::DriverExpectation;
use crate::poly::{rational_from_f64, MultiPoly, Vars};
use crate::signature::{path_signature, SampledPath, TruncatedSignature, WordSet};
use crate::words::{enumerate_words, Word};

/// SplitMix64 finaliser; used to derive independent sub-seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for a labelled sub-task (replication, path,
/// purpose, ...). Distinct label sequences give unrelated seeds.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix(base), |acc, &l| mix(acc ^ mix(l)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Purpose labels for [`derive_seed`].
pub mod stream {
    pub const DRIVER: u64 = 1;
    pub const DRIVER_ESIG: u64 = 2;
    pub const REPLICATION: u64 = 3;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    MonteCarlo {
        num_paths: usize,
        seed: Option<u64>,
        /// Each draw was paired with its noise reflection.
        #[serde(default)]
        antithetic: bool,
    },
}

/// `E[X^σ_{0,T}]` for a set of words.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedSignature {
    dimension: usize,
    level: usize,
    horizon: f64,
    values: BTreeMap<Word, f64>,
    std_errors: Option<BTreeMap<Word, f64>>,
    provenance: Provenance,
}

impl ExpectedSignature {
    pub fn new(
        dimension: usize,
        horizon: f64,
        values: BTreeMap<Word, f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if values.keys().any(|w| w.alphabet_size() != dimension) {
            return Err(Error::DimensionMismatch(
                "expected-signature words must share the driver alphabet".into(),
            ));
        }
        let level = values.keys().map(Word::len).max().unwrap_or(0);
        Ok(Self {
            dimension,
            level,
            horizon,
            values,
            std_errors: None,
            provenance,
        })
    }

    pub fn from_signature(sig: &TruncatedSignature, horizon: f64, provenance: Provenance) -> Self {
        Self {
            dimension: sig.dimension(),
            level: sig.level(),
            horizon,
            values: sig.entries().collect(),
            std_errors: None,
            provenance,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn values(&self) -> &BTreeMap<Word, f64> {
        &self.values
    }

    pub fn std_errors(&self) -> Option<&BTreeMap<Word, f64>> {
        self.std_errors.as_ref()
    }

    pub fn value(&self, word: &Word) -> Result<f64> {
        self.values
            .get(word)
            .copied()
            .ok_or_else(|| Error::TruncationTooShallow {
                word: word.to_string(),
                level: self.level,
            })
    }

    pub fn std_error(&self, word: &Word) -> Option<f64> {
        self.std_errors.as_ref().and_then(|s| s.get(word).copied())
    }

    /// Dense truncated signature; requires every word up to `level`.
    pub fn to_dense(&self) -> Result<TruncatedSignature> {
        let n = self.dimension;
        let levels = (0..=self.level)
            .map(|k| {
                enumerate_words(n, k, k)
                    .iter()
                    .map(|w| self.value(w))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        TruncatedSignature::from_levels(n, levels)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("dimension".into(), self.dimension.into());
        obj.insert("level".into(), self.level.into());
        obj.insert("horizon".into(), self.horizon.into());
        obj.insert(
            "provenance".into(),
            serde_json::to_value(&self.provenance).unwrap_or(Value::Null),
        );
        let values: Map<String, Value> = self
            .values
            .iter()
            .map(|(w, v)| (w.to_string(), (*v).into()))
            .collect();
        obj.insert("values".into(), Value::Object(values));
        if let Some(se) = &self.std_errors {
            let se: Map<String, Value> = se.iter().map(|(w, v)| (w.to_string(), (*v).into())).collect();
            obj.insert("std_errors".into(), Value::Object(se));
        }
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Format {
            path: "<expected signature>".into(),
            message: m.to_string(),
        };
        let n = value
            .get("dimension")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing `dimension`"))? as usize;
        let horizon = value
            .get("horizon")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("missing `horizon`"))?;
        let provenance: Provenance = serde_json::from_value(
            value.get("provenance").cloned().ok_or_else(|| bad("missing `provenance`"))?,
        )?;
        let read_map = |key: &str| -> Result<Option<BTreeMap<Word, f64>>> {
            let Some(obj) = value.get(key) else {
                return Ok(None);
            };
            let obj = obj.as_object().ok_or_else(|| bad("values must be an object"))?;
            obj.iter()
                .map(|(k, v)| {
                    Ok((Word::parse(k, n)?, v.as_f64().ok_or_else(|| bad("values must be numbers"))?))
                })
                .collect::<Result<BTreeMap<_, _>>>()
                .map(Some)
        };
        let values = read_map("values")?.ok_or_else(|| bad("missing `values`"))?;
        let mut esig = Self::new(n, horizon, values, provenance)?;
        esig.std_errors = read_map("std_errors")?;
        Ok(esig)
    }
}

impl DriverExpectation for ExpectedSignature {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn vars(&self) -> Vars {
        Vars::empty()
    }

    fn expectation(&self, word: &Word) -> Option<MultiPoly> {
        self.values
            .get(word)
            .map(|&v| MultiPoly::constant(&Vars::empty(), rational_from_f64(v)))
    }

    fn level(&self) -> usize {
        self.level
    }
}

/// Splits a word into blocks `(1)` and `(i,i)`, `i ≥ 2`; returns
/// `(blocks, pair_blocks)` or `None` when no such decomposition exists.
fn time_bm_blocks(word: &[u8]) -> Option<(usize, usize)> {
    let (mut blocks, mut pairs, mut k) = (0, 0, 0);
    while k < word.len() {
        if word[k] == 1 {
            k += 1;
        } else if k + 1 < word.len() && word[k + 1] == word[k] {
            pairs += 1;
            k += 2;
        } else {
            return None;
        }
        blocks += 1;
    }
    Some((blocks, pairs))
}

/// Expected Stratonovich signature of `(t, W^1, .., W^{n-1})` with
/// independent Brownian channels: `exp(T (e_1 + ½ Σ_i e_i ⊗ e_i))`.
///
/// A word survives only if it splits into blocks `(1)` and `(i,i)`; with
/// `k` blocks of which `p` are pairs its value is `T^k / k! / 2^p`.
pub fn expected_sig_time_bm_channels(horizon: f64, level: usize, dimension: usize) -> ExpectedSignature {
    let mut values = BTreeMap::new();
    for w in enumerate_words(dimension, 0, level) {
        let v = match time_bm_blocks(w.raw()) {
            Some((k, p)) => {
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                horizon.powi(k as i32) / fact / 2f64.powi(p as i32)
            }
            None => 0.0,
        };
        values.insert(w, v);
    }
    ExpectedSignature {
        dimension,
        level,
        horizon,
        values,
        std_errors: None,
        provenance: Provenance::Analytic,
    }
}

/// Expected signature of the Stratonovich pair `(t, W_t)` at horizon `T`.
pub fn expected_sig_time_bm(horizon: f64, level: usize) -> ExpectedSignature {
    expected_sig_time_bm_channels(horizon, level, 2)
}

/// The `(t, W)` expected signature in exact arithmetic, either with the
/// horizon kept as a symbol or fixed to a value. Unbounded depth.
#[derive(Clone, Debug)]
pub struct SymbolicTimeBm {
    dimension: usize,
    vars: Vars,
    horizon: Option<BigRational>,
}

impl SymbolicTimeBm {
    /// `dimension` counts the time channel; the symbol is named `time_var`.
    pub fn new(dimension: usize, time_var: &str) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidConfig("driver needs a time channel".into()));
        }
        Ok(Self {
            dimension,
            vars: Vars::new(&[time_var])?,
            horizon: None,
        })
    }

    /// Horizon substituted exactly (from its binary64 value).
    pub fn at_horizon(dimension: usize, horizon: f64) -> Result<Self> {
        if dimension == 0 || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidConfig("need a time channel and a positive horizon".into()));
        }
        Ok(Self {
            dimension,
            vars: Vars::empty(),
            horizon: Some(rational_from_f64(horizon)),
        })
    }
}

impl DriverExpectation for SymbolicTimeBm {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn vars(&self) -> Vars {
        self.vars.clone()
    }

    fn expectation(&self, word: &Word) -> Option<MultiPoly> {
        if word.raw().iter().any(|&l| l as usize > self.dimension) {
            return None;
        }
        Some(match time_bm_blocks(word.raw()) {
            Some((k, p)) => {
                let fact: num_bigint::BigInt = (1..=k as u64).map(num_bigint::BigInt::from).product();
                let denom = fact * num_bigint::BigInt::from(2u32).pow(p as u32);
                let c = BigRational::new(One::one(), denom);
                match &self.horizon {
                    None => MultiPoly::monomial(&self.vars, vec![k as u32], c),
                    Some(h) => MultiPoly::constant(&self.vars, c * num_traits::pow(h.clone(), k)),
                }
            }
            None => MultiPoly::zero(&self.vars),
        })
    }

    fn level(&self) -> usize {
        usize::MAX
    }
}

/// Averages per-path dense signatures.
pub fn empirical_expected_sig(paths: &[SampledPath], level: usize) -> Result<ExpectedSignature> {
    let first = paths.first().ok_or(Error::Empty("path list"))?;
    let n = first.dimension();
    if paths.iter().any(|p| p.dimension() != n) {
        return Err(Error::DimensionMismatch("paths differ in dimension".into()));
    }
    let sigs: Vec<TruncatedSignature> = paths.par_iter().map(|p| path_signature(p, level)).collect();
    let words: Vec<Word> = enumerate_words(n, 0, level);
    let columns: Vec<Vec<f64>> = sigs
        .iter()
        .map(|s| s.levels().iter().flatten().copied().collect())
        .collect();
    let horizon = first.times().last().copied().unwrap_or(0.0) - first.times()[0];
    Ok(summarise(n, level, horizon, &words, &columns))
}

/// Averages sparse signatures over a prefix-closed word set.
pub fn empirical_expected_words(paths: &[SampledPath], words: &WordSet) -> Result<ExpectedSignature> {
    let first = paths.first().ok_or(Error::Empty("path list"))?;
    let rows: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| words.signature(p).map(|s| s.values().to_vec()))
        .collect::<Result<_>>()?;
    let horizon = first.times().last().copied().unwrap_or(0.0) - first.times()[0];
    Ok(summarise(words.dimension(), words.max_len(), horizon, words.words(), &rows))
}

pub(crate) fn summarise(n: usize, level: usize, horizon: f64, words: &[Word], rows: &[Vec<f64>]) -> ExpectedSignature {
    let count = rows.len() as f64;
    let mut values = BTreeMap::new();
    let mut std_errors = BTreeMap::new();
    for (k, w) in words.iter().enumerate() {
        let mean = rows.iter().map(|r| r[k]).sum::<f64>() / count;
        let se = if rows.len() > 1 {
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        } else {
            0.0
        };
        values.insert(w.clone(), mean);
        std_errors.insert(w.clone(), se);
    }
    ExpectedSignature {
        dimension: n,
        level,
        horizon,
        values,
        std_errors: Some(std_errors),
        provenance: Provenance::MonteCarlo {
            num_paths: rows.len(),
            seed: None,
            antithetic: false,
        },
    }
}

impl ExpectedSignature {
    /// Records the master seed of a Monte Carlo estimate.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let Provenance::MonteCarlo { seed: s, .. } = &mut self.provenance {
            *s = Some(seed);
        }
        self
    }

    pub(crate) fn mark_antithetic(mut self) -> Self {
        if let Provenance::MonteCarlo { antithetic, .. } = &mut self.provenance {
            *antithetic = true;
        }
        self
    }
}

/// Uniform grid `0, dt, .., T`; `dt` is shrunk slightly when it does not
/// divide `T` so that the last point is exactly `T`.
pub fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidConfig(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {dt}")));
    }
    if dt > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidConfig(format!("step {dt} exceeds horizon {horizon}")));
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((0..=steps)
        .map(|k| if k == steps { horizon } else { horizon * k as f64 / steps as f64 })
        .collect())
}

/// Exact Gaussian sampler for fractional Gaussian noise on a uniform grid.
#[derive(Clone)]
pub struct FbmGenerator {
    hurst: f64,
    steps: usize,
    dt: f64,
    method: FgnMethod,
}

#[derive(Clone)]
enum FgnMethod {
    /// Lower-triangular factor, row-major.
    Cholesky(Arc<Vec<f64>>),
    /// `sqrt(λ_k / m)` of the circulant embedding of size `m = 2 * steps`.
    Circulant(Arc<Vec<f64>>, Arc<dyn rustfft::Fft<f64>>),
}

/// Grids with fewer points than this use a cached Cholesky factor.
pub const CHOLESKY_MAX_POINTS: usize = 1024;

fn fgn_autocovariance(hurst: f64, dt: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * dt.powf(h2) * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

impl FbmGenerator {
    pub fn new(hurst: f64, steps: usize, dt: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst <= 1.0) {
            return Err(Error::InvalidConfig(format!("Hurst index {hurst} outside (0, 1]")));
        }
        if steps == 0 || !(dt > 0.0) {
            return Err(Error::InvalidConfig("fBM grid needs at least one positive step".into()));
        }
        let gamma: Vec<f64> = (0..=steps).map(|k| fgn_autocovariance(hurst, dt, k)).collect();
        let method = if steps + 1 < CHOLESKY_MAX_POINTS {
            FgnMethod::Cholesky(Arc::new(toeplitz_cholesky(&gamma[..steps])))
        } else {
            let roots = circulant_roots(&gamma)?;
            let fft = FftPlanner::new().plan_fft_forward(roots.len());
            FgnMethod::Circulant(Arc::new(roots), fft)
        };
        Ok(Self {
            hurst,
            steps,
            dt,
            method,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.method, FgnMethod::Circulant(..))
    }

    /// One draw of the `steps` noise increments.
    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.steps;
        match &self.method {
            FgnMethod::Cholesky(l) => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                (0..n)
                    .map(|i| (0..=i).map(|j| l[i * n + j] * z[j]).sum())
                    .collect()
            }
            FgnMethod::Circulant(roots, fft) => {
                let mut buf: Vec<Complex<f64>> = roots
                    .iter()
                    .map(|&s| {
                        let u: f64 = rng.sample(StandardNormal);
                        let v: f64 = rng.sample(StandardNormal);
                        Complex::new(s * u, s * v)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..n].iter().map(|c| c.re).collect()
            }
        }
    }

    /// Cumulative path `B^h` on the grid, starting at 0.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut path = Vec::with_capacity(self.steps + 1);
        path.push(0.0);
        let mut acc = 0.0;
        for x in self.sample_increments(rng) {
            acc += x;
            path.push(acc);
        }
        path
    }
}

/// Cholesky factor of the symmetric Toeplitz matrix with first row
/// `gamma`; pivots that vanish (semidefinite case) zero their column.
fn toeplitz_cholesky(gamma: &[f64]) -> Vec<f64> {
    let n = gamma.len();
    let mut l = vec![0.0; n * n];
    let scale = gamma[0].abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..=i {
            let mut s = gamma[i - j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                l[i * n + i] = if s > 1e-12 * scale { s.sqrt() } else { 0.0 };
            } else {
                let d = l[j * n + j];
                l[i * n + j] = if d > 0.0 { s / d } else { 0.0 };
            }
        }
    }
    l
}

fn circulant_roots(gamma: &[f64]) -> Result<Vec<f64>> {
    let n = gamma.len() - 1;
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| Complex::new(if j <= n { gamma[j] } else { gamma[m - j] }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    let max = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    row.iter()
        .map(|c| {
            if c.re < -1e-10 * max {
                Err(Error::CovarianceNotPositive)
            } else {
                Ok((c.re.max(0.0) / m as f64).sqrt())
            }
        })
        .collect()
}

/// Which law drives the response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverKind {
    /// `(t, W_t)` with a standard Brownian motion.
    TimeBm,
    /// `(t, B^h_t)` with a fractional Brownian motion.
    Fbm { hurst: f64 },
}

impl DriverKind {
    pub fn name(&self) -> &'static str {
        match self {
            DriverKind::TimeBm => "time_bm",
            DriverKind::Fbm { .. } => "fbm",
        }
    }

    pub fn hurst(&self) -> f64 {
        match self {
            DriverKind::TimeBm => 0.5,
            DriverKind::Fbm { hurst } => *hurst,
        }
    }
}

/// Samples `(t, noise)` driver paths on a fixed grid.
#[derive(Clone)]
pub struct DriverSampler {
    kind: DriverKind,
    times: Vec<f64>,
    fbm: Option<FbmGenerator>,
}

impl DriverSampler {
    pub fn new(kind: DriverKind, horizon: f64, dt: f64) -> Result<Self> {
        let times = time_grid(horizon, dt)?;
        let steps = times.len() - 1;
        let fbm = match &kind {
            DriverKind::TimeBm => None,
            DriverKind::Fbm { hurst } => {
                if !(*hurst > 0.25 && *hurst <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "Hurst index {hurst} outside (1/4, 1]"
                    )));
                }
                Some(FbmGenerator::new(*hurst, steps, horizon / steps as f64)?)
            }
        };
        Ok(Self { kind, times, fbm })
    }

    pub fn kind(&self) -> &DriverKind {
        &self.kind
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampledPath {
        let noise = match &self.fbm {
            Some(g) => g.sample_path(rng),
            None => {
                let mut acc = 0.0;
                let mut w = vec![0.0];
                for k in 1..self.times.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    acc += z * (self.times[k] - self.times[k - 1]).sqrt();
                    w.push(acc);
                }
                w
            }
        };
        let values = self
            .times
            .iter()
            .zip(noise)
            .map(|(&t, x)| vec![t, x])
            .collect();
        SampledPath::new(self.times.clone(), values).expect("grid is valid by construction")
    }

    /// Path number `index` of the stream rooted at `seed`.
    pub fn sample_seeded(&self, seed: u64, index: u64) -> SampledPath {
        self.sample(&mut rng_from_seed(derive_seed(seed, &[stream::DRIVER, index])))
    }
}

/// One fBM path `B^h` on `[0, T]` as a 1-d sampled path.
pub fn sample_fbm(hurst: f64, horizon: f64, dt: f64, seed: u64) -> Result<SampledPath> {
    let times = time_grid(horizon, dt)?;
    let steps = times.len() - 1;
    let g = FbmGenerator::new(hurst, steps, horizon / steps as f64)?;
    let path = g.sample_path(&mut rng_from_seed(seed));
    SampledPath::new(times, path.into_iter().map(|x| vec![x]).collect())
}

/// The path with every channel but the first (time) negated. Driver laws
/// here are symmetric under this map.
pub fn reflect_noise(path: &SampledPath) -> SampledPath {
    let values = path
        .values()
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, &x)| if i == 0 { x } else { -x }).collect())
        .collect();
    SampledPath::new(path.times().to_vec(), values).expect("same grid")
}

/// Mean of the word signatures of `path` and its reflection, after `map`.
pub(crate) fn antithetic_row(
    path: &SampledPath,
    words: &WordSet,
    map: impl Fn(&SampledPath) -> Result<SampledPath>,
) -> Result<Vec<f64>> {
    let a = words.signature(&map(path)?)?;
    let b = words.signature(&map(&reflect_noise(path))?)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect())
}

/// Monte Carlo expected signature of the sampler's driver over `words`,
/// from `num_paths` antithetic pairs. Words with an odd number of noise
/// letters come out exactly zero, as they are in law.
pub fn monte_carlo_expected_words(
    sampler: &DriverSampler,
    words: &WordSet,
    num_paths: usize,
    seed: u64,
) -> Result<ExpectedSignature> {
    if num_paths == 0 {
        return Err(Error::Empty("Monte Carlo path count"));
    }
    let rows: Vec<Vec<f64>> = (0..num_paths as u64)
        .into_par_iter()
        .map(|k| antithetic_row(&sampler.sample_seeded(seed, k), words, |p| Ok(p.clone())))
        .collect::<Result<_>>()?;
    let horizon = sampler.times().last().copied().unwrap_or(0.0);
    Ok(summarise(words.dimension(), words.max_len(), horizon, words.words(), &rows)
        .with_seed(seed)
        .mark_antithetic())
}

/// `(X_t, X_{c_1 t}, ..)`: stacks time-rescaled copies of `path` evaluated
/// by linear interpolation on the original grid restricted to `[0, T]`.
pub fn augment_time_scales(path: &SampledPath, horizon: f64, scales: &[f64]) -> Result<SampledPath> {
    let end = *path.times().last().unwrap_or(&0.0);
    for &c in scales {
        if !(c > 0.0) || c * horizon > end * (1.0 + 1e-12) {
            return Err(Error::InvalidPath(format!(
                "time scale {c} needs the path on [0, {}], available up to {end}",
                c * horizon
            )));
        }
    }
    let times: Vec<f64> = path.times().iter().copied().filter(|&t| t <= horizon * (1.0 + 1e-12)).collect();
    let values = times
        .iter()
        .map(|&t| {
            let mut row = path.value_at(t);
            for &c in scales {
                row.extend(path.value_at((c * t).min(end)));
            }
            row
        })
        .collect();
    SampledPath::new(times, values)
}
