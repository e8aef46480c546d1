//! Symbolic Picard iteration for polynomial vector fields.
//!
//! For `dY = f(Y; θ) dX` with `Y_0 = y0`, the r-th Picard iterate of the
//! increment `Y - y0` is a finite linear combination of driver iterated
//! integrals `X^σ` whose coefficients are polynomials in `θ` and `y0`.
//! [`picard_level1`] produces those coefficients for each response letter,
//! [`lift_to_word`] extends them to any response word through the shuffle
//! product, and [`expected_response_signature`] contracts an expansion
//! against a driver expected signature.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::poly::{rational_from_f64, MultiPoly, Vars};
use crate::signature::{TruncatedSignature, WordSignature};
use crate::words::{for_each_shuffle, Word};

/// `f: R^m × Θ → L(R^n, R^m)`, polynomial in the state.
#[derive(Clone, Debug)]
pub struct VectorField {
    parameters: Vec<String>,
    state: Vec<String>,
    vars: Vars,
    entries: Vec<Vec<MultiPoly>>,
    q: u32,
}

impl VectorField {
    /// `field[j][i]` is the text of `f_{j,i}`: row per state variable,
    /// column per driver channel.
    pub fn parse<S: AsRef<str>>(parameters: &[S], state: &[S], field: &[Vec<S>]) -> Result<Self> {
        let names: Vec<&str> = parameters
            .iter()
            .map(AsRef::as_ref)
            .chain(state.iter().map(AsRef::as_ref))
            .collect();
        let vars = Vars::new(&names).map_err(|e| Error::InvalidVectorField(e.to_string()))?;
        let entries = field
            .iter()
            .enumerate()
            .map(|(j, row)| {
                row.iter()
                    .enumerate()
                    .map(|(i, text)| {
                        MultiPoly::parse(text.as_ref(), &vars).map_err(|e| {
                            Error::InvalidVectorField(format!("entry ({},{}): {e}", j + 1, i + 1))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_polys(parameters, state, entries)
    }

    /// Entries must be polynomials over `parameters ++ state`.
    pub fn from_polys<S: AsRef<str>>(
        parameters: &[S],
        state: &[S],
        entries: Vec<Vec<MultiPoly>>,
    ) -> Result<Self> {
        let parameters: Vec<String> = parameters.iter().map(|s| s.as_ref().to_string()).collect();
        let state: Vec<String> = state.iter().map(|s| s.as_ref().to_string()).collect();
        let names: Vec<&String> = parameters.iter().chain(state.iter()).collect();
        let vars = Vars::new(&names).map_err(|e| Error::InvalidVectorField(e.to_string()))?;
        if state.is_empty() {
            return Err(Error::InvalidVectorField("no state variables".into()));
        }
        if entries.len() != state.len() {
            return Err(Error::InvalidVectorField(format!(
                "{} rows for {} state variables",
                entries.len(),
                state.len()
            )));
        }
        let n = entries[0].len();
        if n == 0 || entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidVectorField(
                "every row needs the same positive number of driver channels".into(),
            ));
        }
        for p in entries.iter().flatten() {
            if p.vars() != &vars {
                return Err(Error::InvalidVectorField(format!(
                    "entry over {:?}, expected {:?}",
                    p.vars(),
                    vars
                )));
            }
        }
        let state_idx: Vec<usize> = (parameters.len()..vars.len()).collect();
        let q = entries
            .iter()
            .flatten()
            .map(|p| p.degree_in_set(&state_idx))
            .max()
            .unwrap_or(0);
        for name in &state {
            let y0 = anchor_name(name);
            if parameters.contains(&y0) || state.contains(&y0) {
                return Err(Error::InvalidVectorField(format!(
                    "name `{y0}` is reserved for the initial value of `{name}`"
                )));
            }
        }
        Ok(Self {
            parameters,
            state,
            vars,
            entries,
            q,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state.len()
    }

    pub fn driver_dim(&self) -> usize {
        self.entries[0].len()
    }

    /// Maximum total degree in the state variables.
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn parameters(&self) -> &[String] {
        &self.parameters
    }

    pub fn state(&self) -> &[String] {
        &self.state
    }

    /// `parameters ++ state`.
    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    /// `f_{j,i}`, zero-based.
    pub fn entry(&self, j: usize, i: usize) -> &MultiPoly {
        &self.entries[j][i]
    }

    /// Names of the initial-value variables used by symbolic expansions.
    pub fn anchor_names(&self) -> Vec<String> {
        self.state.iter().map(|s| anchor_name(s)).collect()
    }

    /// Block-diagonal field for `k` independent copies of the system, copy
    /// `c` driven by channels `c*n+1..(c+1)*n` with state names suffixed by
    /// `_c` for `c ≥ 1`.
    pub fn block_diagonal(&self, copies: usize) -> Result<VectorField> {
        if copies == 0 {
            return Err(Error::InvalidVectorField("need at least one copy".into()));
        }
        let (m, n, d) = (self.state_dim(), self.driver_dim(), self.parameters.len());
        let mut state = Vec::with_capacity(m * copies);
        for c in 0..copies {
            for s in &self.state {
                state.push(if c == 0 { s.clone() } else { format!("{s}_{c}") });
            }
        }
        let names: Vec<&String> = self.parameters.iter().chain(state.iter()).collect();
        let vars = Vars::new(&names).map_err(|e| Error::InvalidVectorField(e.to_string()))?;
        let mut entries = vec![vec![MultiPoly::zero(&vars); n * copies]; m * copies];
        for c in 0..copies {
            let mut names: Vec<String> = self.parameters.clone();
            names.extend(state[c * m..(c + 1) * m].iter().cloned());
            let local = Vars::new(&names)?;
            for j in 0..m {
                for i in 0..n {
                    let renamed = self.entries[j][i].rename(&local)?;
                    entries[c * m + j][c * n + i] = renamed.embed(&vars)?;
                }
            }
        }
        debug_assert_eq!(vars.len(), d + m * copies);
        VectorField::from_polys(&self.parameters, &state, entries)
    }

    /// Entries with `θ` fixed, as polynomials over the state variables only.
    pub fn with_parameters(&self, theta: &[f64]) -> Result<Vec<Vec<MultiPoly>>> {
        if theta.len() != self.parameters.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter values for {} parameters",
                theta.len(),
                self.parameters.len()
            )));
        }
        let state_vars = Vars::new(&self.state)?;
        self.entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| {
                        let mut p = p.clone();
                        for (k, &v) in theta.iter().enumerate() {
                            p = p.substitute_index(k, &rational_from_f64(v));
                        }
                        p.embed(&state_vars)
                    })
                    .collect()
            })
            .collect()
    }
}

fn anchor_name(state: &str) -> String {
    format!("{state}0")
}

/// How the initial value enters an expansion.
#[derive(Clone, Debug, PartialEq)]
pub enum Anchor {
    /// Coefficients are polynomials in `θ` and the `y0` symbols.
    Symbolic,
    /// `y0` substituted exactly; coefficients are polynomials in `θ` only.
    Numeric(Vec<f64>),
}

/// Coefficients `α^τ_{r,σ}` of `Y(r)^τ_{0,t} = Σ_σ α^τ_{r,σ} X^σ_{0,t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PicardExpansion {
    tau: Word,
    r: usize,
    driver_dimension: usize,
    vars: Vars,
    anchor: Anchor,
    coefficients: BTreeMap<Word, MultiPoly>,
}

impl PicardExpansion {
    pub fn tau(&self) -> &Word {
        &self.tau
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn driver_dimension(&self) -> usize {
        self.driver_dimension
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn anchor(&self) -> &Anchor {
        &self.anchor
    }

    pub fn coefficients(&self) -> &BTreeMap<Word, MultiPoly> {
        &self.coefficients
    }

    pub fn coefficient(&self, sigma: &Word) -> Option<&MultiPoly> {
        self.coefficients.get(sigma)
    }

    /// Number of driver words with a nonzero coefficient.
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.coefficients.keys().map(Word::len).max().unwrap_or(0)
    }

    /// Largest combined degree in the `y0` symbols (0 when anchored
    /// numerically).
    pub fn y0_degree(&self) -> u32 {
        let d = self.vars.len();
        let m = self.tau.alphabet_size();
        if self.anchor != Anchor::Symbolic {
            return 0;
        }
        let idx: Vec<usize> = (d - m..d).collect();
        self.coefficients
            .values()
            .map(|p| p.degree_in_set(&idx))
            .max()
            .unwrap_or(0)
    }

    /// Replaces the `y0` symbols by exact values.
    pub fn anchored_at(&self, y0: &[f64]) -> Result<PicardExpansion> {
        let m = self.tau.alphabet_size();
        match &self.anchor {
            Anchor::Numeric(v) if v == y0 => return Ok(self.clone()),
            Anchor::Numeric(_) => {
                return Err(Error::InvalidConfig(
                    "expansion is already anchored at a different y0".into(),
                ))
            }
            Anchor::Symbolic => {}
        }
        if y0.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} initial values for {m} state variables",
                y0.len()
            )));
        }
        let d = self.vars.len() - m;
        let theta_vars = Vars::new(&self.vars.names()[..d])?;
        let mut coefficients = BTreeMap::new();
        for (sigma, p) in &self.coefficients {
            let mut p = p.clone();
            for (k, &v) in y0.iter().enumerate() {
                p = p.substitute_index(d + k, &rational_from_f64(v));
            }
            let p = p.embed(&theta_vars)?;
            if !p.is_zero() {
                coefficients.insert(sigma.clone(), p);
            }
        }
        Ok(PicardExpansion {
            tau: self.tau.clone(),
            r: self.r,
            driver_dimension: self.driver_dimension,
            vars: theta_vars,
            anchor: Anchor::Numeric(y0.to_vec()),
            coefficients,
        })
    }

    /// `Σ α_σ(point) X^σ` for a realised driver signature; `point` assigns
    /// every coefficient variable.
    pub fn evaluate_on(&self, signature: &TruncatedSignature, point: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (sigma, p) in &self.coefficients {
            total += p.compile().eval(point) * signature.entry(sigma)?;
        }
        Ok(total)
    }

    /// As [`Self::evaluate_on`] for a sparse word signature.
    pub fn evaluate_on_words(&self, signature: &WordSignature, point: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (sigma, p) in &self.coefficients {
            let x = signature.entry(sigma).ok_or_else(|| Error::TruncationTooShallow {
                word: sigma.to_string(),
                level: signature.words().iter().map(Word::len).max().unwrap_or(0),
            })?;
            total += p.compile().eval(point) * x;
        }
        Ok(total)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("tau".into(), Value::String(self.tau.to_string()));
        obj.insert("state_dimension".into(), self.tau.alphabet_size().into());
        obj.insert("r".into(), self.r.into());
        obj.insert("driver_dimension".into(), self.driver_dimension.into());
        obj.insert(
            "variables".into(),
            Value::Array(self.vars.names().iter().map(|n| Value::String(n.clone())).collect()),
        );
        obj.insert(
            "anchor".into(),
            match &self.anchor {
                Anchor::Symbolic => Value::String("symbolic".into()),
                Anchor::Numeric(v) => serde_json::json!({ "y0": v }),
            },
        );
        let coeffs: Map<String, Value> = self
            .coefficients
            .iter()
            .map(|(w, p)| (w.to_string(), Value::String(p.to_string())))
            .collect();
        obj.insert("coefficients".into(), Value::Object(coeffs));
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<PicardExpansion> {
        let bad = |m: &str| Error::Format {
            path: "<expansion>".into(),
            message: m.to_string(),
        };
        let get_usize = |key: &str| {
            value
                .get(key)
                .and_then(Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| bad(&format!("missing `{key}`")))
        };
        let m = get_usize("state_dimension")?;
        let r = get_usize("r")?;
        let n = get_usize("driver_dimension")?;
        let tau = Word::parse(
            value.get("tau").and_then(Value::as_str).ok_or_else(|| bad("missing `tau`"))?,
            m,
        )?;
        let names: Vec<String> = value
            .get("variables")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `variables`"))?
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad("variable names must be strings")))
            .collect::<Result<_>>()?;
        let vars = Vars::new(&names)?;
        let anchor = match value.get("anchor") {
            Some(Value::String(s)) if s == "symbolic" => Anchor::Symbolic,
            Some(Value::Object(o)) => Anchor::Numeric(
                o.get("y0")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("anchor needs `y0`"))?
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| bad("y0 must be numeric")))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(bad("missing `anchor`")),
        };
        let mut coefficients = BTreeMap::new();
        for (w, p) in value
            .get("coefficients")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing `coefficients`"))?
        {
            let p = MultiPoly::parse(p.as_str().ok_or_else(|| bad("coefficients must be strings"))?, &vars)?;
            if !p.is_zero() {
                coefficients.insert(Word::parse(w, n)?, p);
            }
        }
        Ok(PicardExpansion {
            tau,
            r,
            driver_dimension: n,
            vars,
            anchor,
            coefficients,
        })
    }
}

/// Bound on `|σ|` for words in the expansion of `Y(r)^τ`.
pub fn max_driver_word_len(tau_len: usize, q: u32, r: usize) -> usize {
    let per_letter = match q {
        0 => r.min(1),
        1 => r,
        _ => (0..r).map(|k| (q as usize).pow(k as u32)).sum(),
    };
    tau_len * per_letter
}

type Coeffs = BTreeMap<Word, MultiPoly>;

/// Precomputed `∂_τ f_{j,i}(y0)` for ordered words `τ`, `|τ| ≤ q`.
struct Taylor {
    /// `[j][i]` → list of (τ, coefficient polynomial over the expansion vars)
    terms: Vec<Vec<Vec<(Word, MultiPoly)>>>,
}

fn taylor_coefficients(vf: &VectorField, target: &Vars, anchor: &Anchor) -> Result<Taylor> {
    let (m, n, d) = (vf.state_dim(), vf.driver_dim(), vf.parameters().len());
    let words = crate::words::enumerate_words(m, 0, vf.q() as usize);
    let y0: Vec<BigRational> = match anchor {
        Anchor::Numeric(v) => v.iter().map(|&x| rational_from_f64(x)).collect(),
        Anchor::Symbolic => Vec::new(),
    };
    let mut terms = vec![vec![Vec::new(); n]; m];
    for j in 0..m {
        for i in 0..n {
            // Mixed partials commute: cache by sorted letters.
            let mut cache: HashMap<Vec<u8>, MultiPoly> = HashMap::new();
            for tau in &words {
                let mut key = tau.raw().to_vec();
                key.sort_unstable();
                let value = match cache.get(&key) {
                    Some(p) => p.clone(),
                    None => {
                        let mut p = vf.entry(j, i).clone();
                        for &l in &key {
                            p = p.diff_index(d + l as usize - 1);
                        }
                        let p = match anchor {
                            Anchor::Symbolic => p.rename(target)?,
                            Anchor::Numeric(_) => {
                                for (k, v) in y0.iter().enumerate() {
                                    p = p.substitute_index(d + k, v);
                                }
                                p.embed(target)?
                            }
                        };
                        cache.insert(key, p.clone());
                        p
                    }
                };
                if !value.is_zero() {
                    terms[j][i].push((tau.clone(), value));
                }
            }
        }
    }
    Ok(Taylor { terms })
}

fn check_anchor(vf: &VectorField, anchor: &Anchor) -> Result<Vars> {
    match anchor {
        Anchor::Symbolic => {
            let mut names = vf.parameters().to_vec();
            names.extend(vf.anchor_names());
            Vars::new(&names)
        }
        Anchor::Numeric(v) => {
            if v.len() != vf.state_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "{} initial values for {} state variables",
                    v.len(),
                    vf.state_dim()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig("initial value must be finite".into()));
            }
            Vars::new(vf.parameters())
        }
    }
}

/// Level-1 expansions of the r-th Picard iterate, one per response letter,
/// with `y0` kept symbolic (variables `<state>0`).
pub fn picard_level1(vf: &VectorField, r: usize) -> Result<Vec<PicardExpansion>> {
    picard_level1_with(vf, r, Anchor::Symbolic)
}

/// Level-1 expansions with `y0` substituted during the iteration, which
/// keeps intermediate coefficients small.
pub fn picard_level1_anchored(vf: &VectorField, r: usize, y0: &[f64]) -> Result<Vec<PicardExpansion>> {
    picard_level1_with(vf, r, Anchor::Numeric(y0.to_vec()))
}

fn picard_level1_with(vf: &VectorField, r: usize, anchor: Anchor) -> Result<Vec<PicardExpansion>> {
    let vars = check_anchor(vf, &anchor)?;
    let (m, n) = (vf.state_dim(), vf.driver_dim());
    let taylor = taylor_coefficients(vf, &vars, &anchor)?;
    let mut level1: Vec<Coeffs> = vec![BTreeMap::new(); m];
    for _ in 0..r {
        let mut lifts: HashMap<Vec<u8>, Coeffs> = HashMap::new();
        let mut next: Vec<Coeffs> = vec![BTreeMap::new(); m];
        for j in 0..m {
            let mut acc: HashMap<Vec<u8>, MultiPoly> = HashMap::new();
            for i in 0..n {
                for (tau, c) in &taylor.terms[j][i] {
                    let lifted = lift_memo(&level1, tau.raw(), n, &vars, &mut lifts);
                    for (sigma, alpha) in lifted {
                        let mut key = sigma.raw().to_vec();
                        key.push(i as u8 + 1);
                        acc.entry(key)
                            .or_insert_with(|| MultiPoly::zero(&vars))
                            .add_product_assign(c, alpha);
                    }
                }
            }
            next[j] = finish(acc, n);
        }
        level1 = next;
    }
    Ok(level1
        .into_iter()
        .enumerate()
        .map(|(j, coefficients)| PicardExpansion {
            tau: Word::from_raw(vec![j as u8 + 1], m),
            r,
            driver_dimension: n,
            vars: vars.clone(),
            anchor: anchor.clone(),
            coefficients,
        })
        .collect())
}

fn finish(acc: HashMap<Vec<u8>, MultiPoly>, n: usize) -> Coeffs {
    acc.into_iter()
        .filter(|(_, p)| !p.is_zero())
        .map(|(k, p)| (Word::from_raw(k, n), p))
        .collect()
}

fn lift_memo<'a>(
    level1: &[Coeffs],
    tau: &[u8],
    n: usize,
    vars: &Vars,
    memo: &'a mut HashMap<Vec<u8>, Coeffs>,
) -> &'a Coeffs {
    if !memo.contains_key(tau) {
        let value = match tau.split_last() {
            None => {
                let mut unit = BTreeMap::new();
                unit.insert(Word::empty(n), MultiPoly::one(vars));
                unit
            }
            Some((&last, rest)) => {
                let prefix = lift_memo(level1, rest, n, vars, memo).clone();
                lift_step(&prefix, &level1[last as usize - 1], n, vars)
            }
        };
        memo.insert(tau.to_vec(), value);
    }
    &memo[tau]
}

/// `∫ (Σ a_σ1 X^σ1) d(Σ b_σ2 X^σ2) = Σ a_σ1 b_σ2 Σ_{w ∈ σ1 ⧢ σ2−} X^{(w, last σ2)}`.
fn lift_step(a: &Coeffs, b: &Coeffs, n: usize, vars: &Vars) -> Coeffs {
    let mut acc: HashMap<Vec<u8>, MultiPoly> = HashMap::new();
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    for (s2, beta) in b {
        let Some((&l, s2_rest)) = s2.raw().split_last() else {
            continue;
        };
        for (s1, alpha) in a {
            let product = alpha * beta;
            counts.clear();
            for_each_shuffle(s1.raw(), s2_rest, |w| {
                let mut key = Vec::with_capacity(w.len() + 1);
                key.extend_from_slice(w);
                key.push(l);
                *counts.entry(key).or_insert(0) += 1;
            });
            for (key, count) in counts.drain() {
                let scale = BigRational::from_integer(count.into());
                acc.entry(key)
                    .or_insert_with(|| MultiPoly::zero(vars))
                    .add_scaled_assign(&product, &scale);
            }
        }
    }
    finish(acc, n)
}

/// Expansion of `Y(r)^τ` from the level-1 expansions.
pub fn lift_to_word(level1: &[PicardExpansion], tau: &Word) -> Result<PicardExpansion> {
    let first = level1
        .first()
        .ok_or(Error::Empty("level-1 expansions"))?;
    let m = level1.len();
    if tau.alphabet_size() != m && tau.raw().iter().any(|&l| l as usize > m) {
        return Err(Error::InvalidLetter {
            letter: tau.raw().iter().map(|&l| l as usize).max().unwrap_or(0),
            alphabet_size: m,
        });
    }
    for (j, e) in level1.iter().enumerate() {
        if e.r != first.r
            || e.driver_dimension != first.driver_dimension
            || e.vars != first.vars
            || e.anchor != first.anchor
            || e.tau.raw() != [j as u8 + 1]
        {
            return Err(Error::InvalidConfig(
                "level-1 expansions must be letters 1..m with a shared r, driver and anchor".into(),
            ));
        }
    }
    let n = first.driver_dimension;
    let coeffs: Vec<Coeffs> = level1.iter().map(|e| e.coefficients.clone()).collect();
    let mut memo = HashMap::new();
    let coefficients = lift_memo(&coeffs, tau.raw(), n, &first.vars, &mut memo).clone();
    Ok(PicardExpansion {
        tau: Word::from_raw(tau.raw().to_vec(), m),
        r: first.r,
        driver_dimension: n,
        vars: first.vars.clone(),
        anchor: first.anchor.clone(),
        coefficients,
    })
}

/// Source of `E[X^σ_{0,T}]`, either numeric or symbolic in a time variable.
pub trait DriverExpectation {
    fn dimension(&self) -> usize;
    /// Variables of the returned polynomials (empty for numeric sources).
    fn vars(&self) -> Vars;
    /// `None` when the word is beyond the available depth.
    fn expectation(&self, word: &Word) -> Option<MultiPoly>;
    /// Depth to report in truncation errors.
    fn level(&self) -> usize;
}

/// `Σ_σ α^τ_σ E[X^σ]`, a polynomial over the expansion variables followed
/// by any driver variables.
pub fn expected_response_signature(
    expansion: &PicardExpansion,
    driver: &dyn DriverExpectation,
) -> Result<MultiPoly> {
    if driver.dimension() != expansion.driver_dimension {
        return Err(Error::AlphabetMismatch {
            left: expansion.driver_dimension,
            right: driver.dimension(),
        });
    }
    let vars = expansion.vars.union(&driver.vars());
    let mut total = MultiPoly::zero(&vars);
    for (sigma, alpha) in &expansion.coefficients {
        let e = driver
            .expectation(sigma)
            .ok_or_else(|| Error::TruncationTooShallow {
                word: sigma.to_string(),
                level: driver.level(),
            })?;
        if e.is_zero() {
            continue;
        }
        total.add_product_assign(&alpha.embed(&vars)?, &e.embed(&vars)?);
    }
    Ok(total)
}

/// `E[Y(r)^τ]` without materialising the final lift: the last integration
/// step is contracted against the driver expectation pair by pair.
/// Equal to `expected_response_signature(lift_to_word(level1, τ), driver)`.
pub fn expected_lifted_signature(
    level1: &[PicardExpansion],
    tau: &Word,
    driver: &dyn DriverExpectation,
) -> Result<MultiPoly> {
    let Some((&last, prefix)) = tau.raw().split_last() else {
        let e = lift_to_word(level1, tau)?;
        return expected_response_signature(&e, driver);
    };
    let m = level1.len();
    let prefix = lift_to_word(level1, &Word::from_raw(prefix.to_vec(), m))?;
    let tail = level1
        .get(last as usize - 1)
        .ok_or(Error::InvalidLetter {
            letter: last as usize,
            alphabet_size: m,
        })?;
    if driver.dimension() != prefix.driver_dimension {
        return Err(Error::AlphabetMismatch {
            left: prefix.driver_dimension,
            right: driver.dimension(),
        });
    }
    let n = prefix.driver_dimension;
    let vars = prefix.vars.union(&driver.vars());
    let mut cache: HashMap<Vec<u8>, Option<MultiPoly>> = HashMap::new();
    let mut total = MultiPoly::zero(&vars);
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    for (s2, beta) in &tail.coefficients {
        let Some((&l, s2_rest)) = s2.raw().split_last() else {
            continue;
        };
        for (s1, alpha) in &prefix.coefficients {
            counts.clear();
            for_each_shuffle(s1.raw(), s2_rest, |w| {
                let mut key = Vec::with_capacity(w.len() + 1);
                key.extend_from_slice(w);
                key.push(l);
                *counts.entry(key).or_insert(0) += 1;
            });
            let mut moment = MultiPoly::zero(&vars);
            for (key, &count) in &counts {
                let e = match cache.get(key) {
                    Some(e) => e.clone(),
                    None => {
                        let e = driver
                            .expectation(&Word::from_raw(key.clone(), n))
                            .map(|p| p.embed(&vars))
                            .transpose()?;
                        cache.insert(key.clone(), e.clone());
                        e
                    }
                };
                let e = e.ok_or_else(|| Error::TruncationTooShallow {
                    word: Word::from_raw(key.clone(), n).to_string(),
                    level: driver.level(),
                })?;
                moment.add_scaled_assign(&e, &BigRational::from_integer(count.into()));
            }
            if moment.is_zero() {
                continue;
            }
            let product = (alpha * beta).embed(&vars)?;
            total.add_product_assign(&product, &moment);
        }
    }
    Ok(total)
}

/// Numeric reference: Picard iterates computed by quadrature on a fine
/// polyline driver, returned as sampled response increments `Y(r) - y0`.
pub fn numeric_picard_iterate(
    vf: &VectorField,
    theta: &[f64],
    y0: &[f64],
    driver: &crate::signature::SampledPath,
    r: usize,
) -> Result<crate::signature::SampledPath> {
    if driver.dimension() != vf.driver_dim() {
        return Err(Error::AlphabetMismatch {
            left: vf.driver_dim(),
            right: driver.dimension(),
        });
    }
    let m = vf.state_dim();
    let fields: Vec<Vec<crate::poly::CompiledPoly>> = vf
        .with_parameters(theta)?
        .iter()
        .map(|row| row.iter().map(MultiPoly::compile).collect())
        .collect();
    let eval = |y: &[f64]| -> Vec<Vec<f64>> {
        let point: Vec<f64> = y.iter().zip(y0).map(|(a, b)| a + b).collect();
        fields
            .iter()
            .map(|row| row.iter().map(|p| p.eval(&point)).collect())
            .collect()
    };
    let steps = driver.len();
    let mut current = vec![vec![0.0; m]; steps];
    let increments: Vec<Vec<f64>> = driver.increments().collect();
    for _ in 0..r {
        let f: Vec<Vec<Vec<f64>>> = current.iter().map(|y| eval(y)).collect();
        let mut next = vec![vec![0.0; m]; steps];
        for k in 1..steps {
            for j in 0..m {
                // Trapezoidal rule in the integrand.
                let dx = &increments[k - 1];
                let inc: f64 = (0..dx.len())
                    .map(|i| 0.5 * (f[k - 1][j][i] + f[k][j][i]) * dx[i])
                    .sum();
                next[k][j] = next[k - 1][j] + inc;
            }
        }
        current = next;
    }
    crate::signature::SampledPath::new(driver.times().to_vec(), current)
}

impl PicardExpansion {
    /// Zero-order term: the expansion of the empty response word.
    pub fn unit(m: usize, n: usize, vars: &Vars, anchor: Anchor, r: usize) -> PicardExpansion {
        let mut coefficients = BTreeMap::new();
        coefficients.insert(Word::empty(n), MultiPoly::one(vars));
        PicardExpansion {
            tau: Word::empty(m),
            r,
            driver_dimension: n,
            vars: vars.clone(),
            anchor,
            coefficients,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn is_unit(p: &MultiPoly) -> bool {
        p.num_terms() == 1 && p.degree() == Some(0) && p.terms().all(|(_, c)| c.is_one())
    }

    fn word(letters: &[usize], n: usize) -> Word {
        Word::new(letters, n).unwrap()
    }

    #[test]
    fn constant_field_integrates_directly() {
        let vf = VectorField::parse(&["th"], &["y"], &[vec!["th"]]).unwrap();
        assert_eq!(vf.q(), 0);
        let l1 = picard_level1(&vf, 1).unwrap();
        assert_eq!(l1[0].len(), 1);
        assert_eq!(l1[0].coefficient(&word(&[1], 1)).unwrap().to_string(), "th");
    }

    #[test]
    fn linear_field_two_steps() {
        let vf = VectorField::parse(&["th"], &["y"], &[vec!["th*y"]]).unwrap();
        let l1 = picard_level1(&vf, 2).unwrap();
        let e = &l1[0];
        assert_eq!(e.len(), 2);
        assert_eq!(e.coefficient(&word(&[1], 1)).unwrap().to_string(), "th*y0");
        assert_eq!(e.coefficient(&word(&[1, 1], 1)).unwrap().to_string(), "th^2*y0");
    }

    #[test]
    fn zero_iterations_give_zero_expansion() {
        let vf = VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap();
        let l1 = picard_level1(&vf, 0).unwrap();
        assert!(l1[0].is_empty());
        let unit = lift_to_word(&l1, &Word::empty(1)).unwrap();
        assert_eq!(unit.len(), 1);
        assert!(is_unit(unit.coefficient(&Word::empty(2)).unwrap()));
    }

    #[test]
    fn square_of_single_term() {
        let vf = VectorField::parse(&["al"], &["y"], &[vec!["al"]]).unwrap();
        let l1 = picard_level1(&vf, 1).unwrap();
        let e = lift_to_word(&l1, &word(&[1, 1], 1)).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.coefficient(&word(&[1, 1], 1)).unwrap().to_string(), "al^2");
        assert_eq!(lift_to_word(&l1, &word(&[1], 1)).unwrap(), l1[0]);
    }

    #[test]
    fn degree_bound_formula() {
        assert_eq!(max_driver_word_len(1, 2, 3), 7);
        assert_eq!(max_driver_word_len(2, 2, 3), 14);
        assert_eq!(max_driver_word_len(2, 1, 3), 6);
        assert_eq!(max_driver_word_len(1, 0, 3), 1);
        assert_eq!(max_driver_word_len(1, 0, 0), 0);
    }

    #[test]
    fn json_round_trip() {
        let vf = VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap();
        let l1 = picard_level1(&vf, 2).unwrap();
        let e = lift_to_word(&l1, &word(&[1, 1], 1)).unwrap();
        let back = PicardExpansion::from_json(&e.to_json()).unwrap();
        assert_eq!(back, e);
        let anchored = e.anchored_at(&[0.5]).unwrap();
        let back = PicardExpansion::from_json(&anchored.to_json()).unwrap();
        assert_eq!(back, anchored);
    }

    #[test]
    fn anchoring_commutes_with_iteration() {
        let vf = VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap();
        let sym = picard_level1(&vf, 2).unwrap();
        let num = picard_level1_anchored(&vf, 2, &[0.25]).unwrap();
        assert_eq!(sym[0].anchored_at(&[0.25]).unwrap(), num[0]);
        let tau = word(&[1, 1], 1);
        assert_eq!(
            lift_to_word(&sym, &tau).unwrap().anchored_at(&[0.25]).unwrap(),
            lift_to_word(&num, &tau).unwrap()
        );
    }

    #[test]
    fn invalid_fields_are_rejected() {
        assert!(VectorField::parse(&["a"], &["y"], &[vec!["a*z"]]).is_err());
        assert!(VectorField::parse(&["a"], &["y", "x"], &[vec!["a"]]).is_err());
        assert!(VectorField::parse(&["y0"], &["y"], &[vec!["y0"]]).is_err());
        assert!(VectorField::parse(&["a"], &["y"], &[vec![]]).is_err());
    }

    #[test]
    fn block_diagonal_copies() {
        let vf = VectorField::parse(&["a", "b"], &["y"], &[vec!["a*(1-y)", "b*y^2"]]).unwrap();
        let aug = vf.block_diagonal(2).unwrap();
        assert_eq!(aug.state(), ["y", "y_1"]);
        assert_eq!(aug.driver_dim(), 4);
        assert_eq!(aug.entry(1, 3).to_string(), "b*y_1^2");
        assert!(aug.entry(0, 2).is_zero());
        assert!(aug.entry(1, 0).is_zero());
    }
}
