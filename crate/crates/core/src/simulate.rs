//! Response simulation by truncated Stratonovich–Taylor schemes.
//!
//! One step from `Y` with driver increment `Δ` is
//! `Y + Σ_w D_w(Y) Π_l Δ_{w_l} / |w|!`, where `D_(i) = f_{·,i}` and
//! `D_(i, rest) = Σ_k f_{k,i} ∂_k D_rest`. The product of increments over
//! `|w|!` is the signature of the linear segment, so the second-order
//! cross term `∫ s dB` is the trapezoid value `Δt ΔB / 2`.

use serde::{Deserialize, Serialize};

use crate::drivers::DriverKind;
use crate::error::{Error, Result};
use crate::picard::VectorField;
use crate::poly::{CompiledPoly, MultiPoly};
use crate::signature::SampledPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// First-order terms only.
    Euler,
    /// Adds the noise–noise second-order terms, `½ g g′ (ΔW)²` for one
    /// noise channel. Brownian drivers only.
    Milstein,
    /// Full second order, and third order when `h ≤ 1/3`.
    Davie,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Milstein => "milstein",
            Scheme::Davie => "davie",
        }
    }

    /// Milstein for Brownian drivers, Davie for fractional ones.
    pub fn default_for(kind: &DriverKind) -> Scheme {
        match kind {
            DriverKind::TimeBm => Scheme::Milstein,
            DriverKind::Fbm { .. } => Scheme::Davie,
        }
    }

    pub fn check(self, kind: &DriverKind) -> Result<()> {
        match (self, kind) {
            (Scheme::Euler | Scheme::Milstein, DriverKind::Fbm { hurst }) if *hurst != 0.5 => {
                Err(Error::SchemeDriverMismatch {
                    scheme: self.name().into(),
                    driver: format!("fbm(h={hurst})"),
                })
            }
            _ => Ok(()),
        }
    }

    /// Davie's error order `dt^{3h-1}` for fractional drivers, `dt` for
    /// Milstein on Brownian motion, `dt^{1/2}` for Euler.
    pub fn error_order(self, kind: &DriverKind) -> f64 {
        match (self, kind) {
            (Scheme::Davie, DriverKind::Fbm { hurst }) => {
                if *hurst > 1.0 / 3.0 {
                    3.0 * hurst - 1.0
                } else {
                    4.0 * hurst - 1.0
                }
            }
            (Scheme::Euler, _) => 0.5,
            _ => 1.0,
        }
    }

    /// Driver words (zero-based channels) kept by the scheme.
    fn words(self, n: usize, hurst: f64) -> Vec<Vec<u8>> {
        let all = |len: usize| crate::words::enumerate_words(n, len, len);
        let zero_based = |w: &crate::words::Word| w.raw().iter().map(|l| l - 1).collect::<Vec<u8>>();
        let mut out: Vec<Vec<u8>> = all(1).iter().map(zero_based).collect();
        match self {
            Scheme::Euler => {}
            Scheme::Milstein => out.extend(
                all(2)
                    .iter()
                    .map(zero_based)
                    .filter(|w| w.iter().all(|&l| l > 0)),
            ),
            Scheme::Davie => {
                out.extend(all(2).iter().map(zero_based));
                if hurst <= 1.0 / 3.0 {
                    out.extend(all(3).iter().map(zero_based));
                }
            }
        }
        out
    }
}

/// Simulation settings for one response path batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "step {} must lie in (0, horizon = {}]",
                self.dt, self.horizon
            )));
        }
        if let Some(h) = self.hurst {
            if !(h > 0.25 && h <= 1.0) {
                return Err(Error::InvalidConfig(format!("Hurst index {h} outside (1/4, 1]")));
            }
        }
        Ok(())
    }

    pub fn driver_kind(&self) -> DriverKind {
        match self.hurst {
            Some(h) if h != 0.5 => DriverKind::Fbm { hurst: h },
            _ => DriverKind::TimeBm,
        }
    }
}

struct Term {
    word: Vec<u8>,
    factor: f64,
    fields: Vec<CompiledPoly>,
}

/// A scheme specialised to one vector field and parameter value.
pub struct ResponseSimulator {
    m: usize,
    n: usize,
    terms: Vec<Term>,
}

impl ResponseSimulator {
    pub fn new(vf: &VectorField, theta: &[f64], scheme: Scheme, kind: &DriverKind) -> Result<Self> {
        scheme.check(kind)?;
        let (m, n) = (vf.state_dim(), vf.driver_dim());
        if scheme == Scheme::Milstein && n < 2 {
            return Err(Error::SchemeDriverMismatch {
                scheme: scheme.name().into(),
                driver: "driver without a noise channel".into(),
            });
        }
        let field = vf.with_parameters(theta)?;
        let mut memo: std::collections::HashMap<Vec<u8>, Vec<MultiPoly>> = Default::default();
        let mut terms = Vec::new();
        for word in scheme.words(n, kind.hurst()) {
            let fields = derivative_field(&field, &word, &mut memo);
            if fields.iter().all(MultiPoly::is_zero) {
                continue;
            }
            let factor = 1.0 / (1..=word.len()).map(|k| k as f64).product::<f64>();
            terms.push(Term {
                word,
                factor,
                fields: fields.iter().map(MultiPoly::compile).collect(),
            });
        }
        Ok(Self { m, n, terms })
    }

    /// Response on the driver grid, started at `y0`.
    pub fn simulate(&self, y0: &[f64], driver: &SampledPath) -> Result<SampledPath> {
        if y0.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "{} initial values for {} state variables",
                y0.len(),
                self.m
            )));
        }
        if driver.dimension() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "driver of dimension {} for a field with {} channels",
                driver.dimension(),
                self.n
            )));
        }
        let mut y = y0.to_vec();
        let mut values = Vec::with_capacity(driver.len());
        values.push(y.clone());
        let mut next = vec![0.0; self.m];
        for inc in driver.increments() {
            next.copy_from_slice(&y);
            for term in &self.terms {
                let weight = term.word.iter().fold(term.factor, |acc, &l| acc * inc[l as usize]);
                if weight == 0.0 {
                    continue;
                }
                for (j, p) in term.fields.iter().enumerate() {
                    next[j] += weight * p.eval(&y);
                }
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPath("response blew up to a non-finite value".into()));
            }
            std::mem::swap(&mut y, &mut next);
            values.push(y.clone());
        }
        SampledPath::new(driver.times().to_vec(), values)
    }
}

/// `D_w` as polynomials over the state variables.
fn derivative_field(
    field: &[Vec<MultiPoly>],
    word: &[u8],
    memo: &mut std::collections::HashMap<Vec<u8>, Vec<MultiPoly>>,
) -> Vec<MultiPoly> {
    if let Some(v) = memo.get(word) {
        return v.clone();
    }
    let m = field.len();
    let out: Vec<MultiPoly> = match word {
        [i] => (0..m).map(|j| field[j][*i as usize].clone()).collect(),
        [i, rest @ ..] => {
            let inner = derivative_field(field, rest, memo);
            inner
                .iter()
                .map(|d| {
                    let mut acc = MultiPoly::zero(d.vars());
                    for k in 0..m {
                        acc = &acc + &(&field[k][*i as usize] * &d.diff_index(k));
                    }
                    acc
                })
                .collect()
        }
        [] => unreachable!("schemes never use the empty word"),
    };
    memo.insert(word.to_vec(), out.clone());
    out
}

/// One response path for a realised driver.
pub fn simulate_response(
    vf: &VectorField,
    theta: &[f64],
    y0: &[f64],
    driver: &SampledPath,
    kind: &DriverKind,
    scheme: Scheme,
) -> Result<SampledPath> {
    ResponseSimulator::new(vf, theta, scheme, kind)?.simulate(y0, driver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{rng_from_seed, DriverSampler};

    fn diffusion_field() -> VectorField {
        VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap()
    }

    #[test]
    fn milstein_terms_for_diffusion_model() {
        let sim = ResponseSimulator::new(&diffusion_field(), &[1.0, 2.0], Scheme::Milstein, &DriverKind::TimeBm).unwrap();
        let words: Vec<_> = sim.terms.iter().map(|t| t.word.clone()).collect();
        assert_eq!(words, vec![vec![0], vec![1], vec![1, 1]]);
        // ½ · D_(2,2) = ½ · g g′ = ½ · b y² · 2 b y = b² y³.
        let t = &sim.terms[2];
        assert!((t.factor * t.fields[0].eval(&[0.5]) - 4.0 * 0.125).abs() < 1e-15);
    }

    #[test]
    fn deterministic_case_matches_closed_form() {
        let sampler = DriverSampler::new(DriverKind::TimeBm, 0.25, 1e-3).unwrap();
        let driver = sampler.sample(&mut rng_from_seed(1));
        let y = simulate_response(&diffusion_field(), &[1.0, 0.0], &[0.0], &driver, &DriverKind::TimeBm, Scheme::Milstein)
            .unwrap();
        let exact = 1.0 - (-0.25f64).exp();
        assert!((y.end()[0] - exact).abs() < 1e-3);
    }

    #[test]
    fn zero_parameters_give_constant_path() {
        let sampler = DriverSampler::new(DriverKind::TimeBm, 0.25, 1e-2).unwrap();
        let driver = sampler.sample(&mut rng_from_seed(2));
        let y = simulate_response(&diffusion_field(), &[0.0, 0.0], &[0.3], &driver, &DriverKind::TimeBm, Scheme::Davie)
            .unwrap();
        assert!(y.values().iter().all(|v| v[0] == 0.3));
    }

    #[test]
    fn mismatches_are_rejected() {
        let fbm = DriverKind::Fbm { hurst: 11.0 / 24.0 };
        assert!(matches!(
            ResponseSimulator::new(&diffusion_field(), &[1.0, 2.0], Scheme::Milstein, &fbm),
            Err(Error::SchemeDriverMismatch { .. })
        ));
        assert!(ResponseSimulator::new(&diffusion_field(), &[1.0, 2.0], Scheme::Davie, &fbm).is_ok());
        let bad = SimConfig {
            horizon: 0.25,
            dt: 0.5,
            seed: 0,
            scheme: Scheme::Milstein,
            hurst: None,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn davie_order_at_h_11_24() {
        let kind = DriverKind::Fbm { hurst: 11.0 / 24.0 };
        let order = Scheme::Davie.error_order(&kind);
        assert!((1e-3f64.powf(order) - 0.075).abs() < 0.001);
        assert_eq!(Scheme::default_for(&kind), Scheme::Davie);
        assert_eq!(Scheme::Davie.words(2, 0.3).len(), 2 + 4 + 8);
    }
}
