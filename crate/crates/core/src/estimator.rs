//! Expected-signature matching: empirical moments, the polynomial moment
//! system, its numeric solution and the asymptotic-normality quantities.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::picard::{expected_response_signature, Anchor, DriverExpectation, PicardExpansion};
use crate::poly::{CompiledPoly, MultiPoly, Vars};
use crate::signature::{SampledPath, WordSet};
use crate::words::Word;

/// Sample means `M^τ_N` plus the per-path entries behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMoments {
    pub words: Vec<Word>,
    pub means: Vec<f64>,
    /// `N × |V|`.
    pub per_path: Vec<Vec<f64>>,
}

impl EmpiricalMoments {
    pub fn sample_size(&self) -> usize {
        self.per_path.len()
    }

    /// Pools several batches over the same words.
    pub fn pooled(batches: &[EmpiricalMoments]) -> Result<EmpiricalMoments> {
        let first = batches.first().ok_or(Error::Empty("moment batches"))?;
        if batches.iter().any(|b| b.words != first.words) {
            return Err(Error::DimensionMismatch("batches use different words".into()));
        }
        let per_path: Vec<Vec<f64>> = batches.iter().flat_map(|b| b.per_path.iter().cloned()).collect();
        Ok(EmpiricalMoments {
            words: first.words.clone(),
            means: column_means(&per_path, first.words.len()),
            per_path,
        })
    }
}

fn column_means(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..width).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect()
}

/// `M^τ_N = (1/N) Σ_i Y_i^τ` over piecewise-linear response signatures.
pub fn empirical_moments(responses: &[SampledPath], words: &[Word], level: usize) -> Result<EmpiricalMoments> {
    let first = responses.first().ok_or(Error::Empty("response paths"))?;
    if words.is_empty() {
        return Err(Error::Empty("word list V"));
    }
    if let Some(w) = words.iter().find(|w| w.len() > level) {
        return Err(Error::TruncationTooShallow {
            word: w.to_string(),
            level,
        });
    }
    let set = WordSet::new(first.dimension(), words)?;
    let idx: Vec<usize> = words
        .iter()
        .map(|w| set.index_of(w).expect("prefix closure contains every word"))
        .collect();
    let per_path: Vec<Vec<f64>> = responses
        .par_iter()
        .map(|p| {
            let s = set.signature(p)?;
            Ok(idx.iter().map(|&i| s.values()[i]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(EmpiricalMoments {
        words: words.to_vec(),
        means: column_means(&per_path, words.len()),
        per_path,
    })
}

/// `E^τ_r(θ) = M^τ_N` for `τ ∈ V`.
#[derive(Clone, Debug)]
pub struct EstimationProblem {
    vars: Vars,
    words: Vec<Word>,
    equations: Vec<MultiPoly>,
    targets: Vec<f64>,
    r: usize,
    sample_size: Option<usize>,
}

impl EstimationProblem {
    pub fn new(
        vars: Vars,
        words: Vec<Word>,
        equations: Vec<MultiPoly>,
        targets: Vec<f64>,
        r: usize,
        sample_size: Option<usize>,
    ) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Empty("word list V"));
        }
        if equations.len() != words.len() || targets.len() != words.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} words, {} equations, {} targets",
                words.len(),
                equations.len(),
                targets.len()
            )));
        }
        if words.len() < vars.len() {
            return Err(Error::InvalidConfig(format!(
                "{} moment words cannot identify {} parameters",
                words.len(),
                vars.len()
            )));
        }
        let equations = equations.iter().map(|e| e.embed(&vars)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vars,
            words,
            equations,
            targets,
            r,
            sample_size,
        })
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn dimension(&self) -> usize {
        self.vars.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn equations(&self) -> &[MultiPoly] {
        &self.equations
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn sample_size(&self) -> Option<usize> {
        self.sample_size
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self> {
        Self::new(
            self.vars.clone(),
            self.words.clone(),
            self.equations.clone(),
            targets,
            self.r,
            self.sample_size,
        )
    }

    /// `E(θ) - M`, each equation evaluated exactly and rounded once.
    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        self.equations
            .iter()
            .zip(&self.targets)
            .map(|(e, m)| {
                let exact = e.eval_rational(&to_rationals(theta)) - crate::poly::rational_from_f64(*m);
                crate::poly::rational_to_f64(&exact)
            })
            .collect()
    }

    /// Theoretical moments at `θ`.
    pub fn moments(&self, theta: &[f64]) -> Vec<f64> {
        self.equations.iter().map(|e| e.eval(theta)).collect()
    }
}

fn to_rationals(x: &[f64]) -> Vec<BigRational> {
    x.iter().map(|&v| crate::poly::rational_from_f64(v)).collect()
}

/// Builds the system from per-word expansions. Symbolic `y0` is replaced
/// by `y0`; the driver expectation must be numeric (no free variables).
pub fn build_system(
    expansions: &[PicardExpansion],
    driver: &dyn DriverExpectation,
    targets: &[f64],
    y0: &[f64],
    sample_size: Option<usize>,
) -> Result<EstimationProblem> {
    let first = expansions.first().ok_or(Error::Empty("expansions"))?;
    if !driver.vars().is_empty() {
        return Err(Error::InvalidConfig(
            "driver expectation still has free variables; fix the horizon first".into(),
        ));
    }
    let mut equations = Vec::with_capacity(expansions.len());
    let mut theta_vars: Option<Vars> = None;
    for e in expansions {
        if e.r() != first.r() {
            return Err(Error::InvalidConfig("expansions use different r".into()));
        }
        let anchored = match e.anchor() {
            Anchor::Symbolic => e.anchored_at(y0)?,
            Anchor::Numeric(v) if v.as_slice() == y0 => e.clone(),
            Anchor::Numeric(v) => {
                return Err(Error::InvalidConfig(format!(
                    "expansion anchored at {v:?}, system requested at {y0:?}"
                )))
            }
        };
        theta_vars.get_or_insert_with(|| anchored.vars().clone());
        equations.push(expected_response_signature(&anchored, driver)?);
    }
    let words = expansions.iter().map(|e| e.tau().clone()).collect();
    EstimationProblem::new(
        theta_vars.expect("at least one expansion"),
        words,
        equations,
        targets.to_vec(),
        first.r(),
        sample_size,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Square systems: all roots in the box.
    #[default]
    Roots,
    /// `|V| ≥ d`: stationary points of `½‖E(θ) - M‖²`.
    LeastSquares,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// `[lo, hi]` per parameter.
    pub bounds: Vec<[f64; 2]>,
    /// Start points per axis.
    pub multistart: usize,
    pub tol: f64,
    pub mode: SolveMode,
    pub max_iter: usize,
}

impl SolveOptions {
    pub fn new(bounds: Vec<[f64; 2]>) -> Self {
        Self {
            bounds,
            multistart: 17,
            tol: 1e-10,
            mode: SolveMode::Roots,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub theta: Vec<f64>,
    /// `‖E(θ) - M‖_∞`.
    pub residual: f64,
    /// `‖J^T (E(θ) - M)‖_∞`, the least-squares stationarity measure.
    pub gradient: f64,
}

struct Compiled {
    polys: Vec<CompiledPoly>,
    targets: Vec<f64>,
    d: usize,
}

impl Compiled {
    fn eval(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.polys.len();
        let mut f = DVector::zeros(k);
        let mut j = DMatrix::zeros(k, self.d);
        let mut g = vec![0.0; self.d];
        for (row, p) in self.polys.iter().enumerate() {
            f[row] = p.eval_grad(x, &mut g) - self.targets[row];
            for c in 0..self.d {
                j[(row, c)] = g[c];
            }
        }
        (f, j)
    }

    fn value(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.polys.len(),
            self.polys.iter().zip(&self.targets).map(|(p, m)| p.eval(x) - m),
        )
    }
}

/// All solutions found from a multistart grid over the box, deduplicated
/// and sorted lexicographically. An empty list means none were found.
pub fn solve_system(problem: &EstimationProblem, options: &SolveOptions) -> Result<Vec<Solution>> {
    let d = problem.dimension();
    if options.bounds.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} box intervals for {d} parameters",
            options.bounds.len()
        )));
    }
    if options.bounds.iter().any(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidConfig("box intervals must be finite with lo ≤ hi".into()));
    }
    if options.mode == SolveMode::Roots && problem.words.len() != d {
        return Err(Error::InvalidConfig(format!(
            "root mode needs a square system, got {} equations in {d} unknowns",
            problem.words.len()
        )));
    }
    if !(options.tol > 0.0) || options.multistart == 0 {
        return Err(Error::InvalidConfig("tol must be positive and multistart ≥ 1".into()));
    }
    let compiled = Compiled {
        polys: problem.equations.iter().map(MultiPoly::compile).collect(),
        targets: problem.targets.clone(),
        d,
    };
    let starts = grid_points(&options.bounds, options.multistart);
    let candidates: Vec<Vec<f64>> = starts
        .par_iter()
        .filter_map(|x0| match options.mode {
            SolveMode::Roots => newton(&compiled, x0, options),
            SolveMode::LeastSquares => levenberg_marquardt(&compiled, x0, options),
        })
        .collect();
    let radius = 10.0 * options.tol;
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for c in candidates {
        if !in_box(&c, &options.bounds) {
            continue;
        }
        if kept.iter().any(|k| dist_inf(k, &c) <= radius.max(1e-9 * (1.0 + norm_inf(k)))) {
            continue;
        }
        kept.push(c);
    }
    kept.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = Vec::new();
    for theta in kept {
        let res = problem.residuals(&theta);
        let residual = norm_inf(&res);
        let (_, j) = compiled.eval(&theta);
        let gradient = (j.transpose() * DVector::from_vec(res)).amax();
        let accept = match options.mode {
            SolveMode::Roots => residual < options.tol,
            SolveMode::LeastSquares => gradient < options.tol,
        };
        if accept {
            out.push(Solution {
                theta,
                residual,
                gradient,
            });
        }
    }
    Ok(out)
}

fn grid_points(bounds: &[[f64; 2]], k: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|[lo, hi]| {
            if k == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
            }
        })
        .collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

fn in_box(x: &[f64], bounds: &[[f64; 2]]) -> bool {
    x.iter().zip(bounds).all(|(v, [lo, hi])| {
        let slack = 1e-9 * (hi - lo).abs().max(1.0);
        *v >= lo - slack && *v <= hi + slack
    })
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Damped Newton; `None` for singular Jacobians or no convergence.
fn newton(c: &Compiled, x0: &[f64], options: &SolveOptions) -> Option<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    let mut converged_at = None;
    for iter in 0..options.max_iter {
        let (f, j) = c.eval(x.as_slice());
        let fnorm = f.norm();
        if !fnorm.is_finite() {
            return None;
        }
        if f.amax() < options.tol * 1e-3 {
            return Some(x.as_slice().to_vec());
        }
        if f.amax() < options.tol && converged_at.is_none() {
            converged_at = Some(iter);
        }
        // A few polishing steps after reaching tol; stop once they stall.
        if converged_at.is_some_and(|k| iter >= k + 3) {
            return Some(x.as_slice().to_vec());
        }
        let step = j.clone().lu().solve(&(-&f))?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &x + &step * t;
            let ft = c.value(trial.as_slice()).norm();
            if ft.is_finite() && ft < fnorm * (1.0 - 1e-4 * t) {
                x = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if converged_at.is_some() {
                return Some(x.as_slice().to_vec());
            }
            // Near a root the line search can fail on rounding alone.
            x += &step;
        }
        if x.iter().any(|v| v.abs() > 1e8) {
            return None;
        }
    }
    converged_at.map(|_| x.as_slice().to_vec())
}

fn levenberg_marquardt(c: &Compiled, x0: &[f64], options: &SolveOptions) -> Option<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    let mut lambda = 1e-3;
    for _ in 0..options.max_iter * 5 {
        let (f, j) = c.eval(x.as_slice());
        let g = j.transpose() * &f;
        if !g.iter().all(|v| v.is_finite()) {
            return None;
        }
        if g.amax() < options.tol * 1e-2 {
            return Some(x.as_slice().to_vec());
        }
        let jtj = j.transpose() * &j;
        let cost = f.norm_squared();
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &x + &step;
            let ct = c.value(trial.as_slice()).norm_squared();
            if ct.is_finite() && ct <= cost {
                x = trial;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return (g.amax() < options.tol).then(|| x.as_slice().to_vec());
        }
        if x.iter().any(|v| v.abs() > 1e8) {
            return None;
        }
    }
    None
}

/// `D_{i,τ} = ∂E^τ/∂θ_i` at `θ`, a `d × |V|` matrix.
pub fn jacobian_d(problem: &EstimationProblem, theta: &[f64]) -> Result<DMatrix<f64>> {
    let d = problem.dimension();
    if theta.len() != d {
        return Err(Error::DimensionMismatch(format!("{} values for {d} parameters", theta.len())));
    }
    let mut out = DMatrix::zeros(d, problem.words.len());
    for (col, e) in problem.equations.iter().enumerate() {
        for i in 0..d {
            out[(i, col)] = e.diff_index(i).eval(theta);
        }
    }
    Ok(out)
}

/// Unbiased sample covariance of the rows (divisor `N - 1`).
pub fn sample_covariance(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.len() < 2 {
        return Err(Error::TooFewSamples(rows.len()));
    }
    let k = rows[0].len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch("rows differ in length".into()));
    }
    let means = column_means(rows, k);
    let mut cov = DMatrix::zeros(k, k);
    for r in rows {
        for a in 0..k {
            let da = r[a] - means[a];
            for b in a..k {
                cov[(a, b)] += da * (r[b] - means[b]);
            }
        }
    }
    let scale = 1.0 / (rows.len() - 1) as f64;
    for a in 0..k {
        for b in a..k {
            cov[(a, b)] *= scale;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    Ok(cov)
}

/// Symmetric PSD square root; eigenvalues below `1e-12 · trace` are set
/// to zero.
pub fn psd_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch("Σ must be square".into()));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let floor = 1e-12 * sigma.trace().abs();
    let roots = eig.eigenvalues.map(|l| if l > floor { l.sqrt() } else { 0.0 });
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `Φ`, with `D` stored as `d × |V|`: `(D^T)^{-1} Σ^{1/2}` for square
/// systems and `(D D^T)^{-1} D Σ^{1/2}` otherwise.
pub fn asymptotic_phi(d: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() != d.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "D has {} columns but Σ is {}×{}",
            d.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let root = psd_sqrt(sigma)?;
    let left = if d.is_square() {
        d.transpose().try_inverse().ok_or(Error::Singular("D"))?
    } else {
        (d * d.transpose()).try_inverse().ok_or(Error::Singular("D D^T"))? * d
    };
    Ok(left * root)
}

/// `√N Φ^{-1} (θ̂ - θ0)` per estimate. Rectangular systems use the
/// symmetric inverse root of `Φ Φ^T` in place of `Φ^{-1}`.
pub fn normalize_estimates(
    estimates: &[Vec<f64>],
    theta0: &[f64],
    d: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    let phi = asymptotic_phi(d, sigma)?;
    let inv = if phi.is_square() {
        phi.try_inverse().ok_or(Error::Singular("Φ"))?
    } else {
        let cov = &phi * phi.transpose();
        psd_sqrt(&cov)?.try_inverse().ok_or(Error::Singular("Φ Φ^T"))?
    };
    let scale = (n as f64).sqrt();
    estimates
        .iter()
        .map(|e| {
            if e.len() != theta0.len() || e.len() != inv.ncols() {
                return Err(Error::DimensionMismatch("estimate dimension".into()));
            }
            let diff = DVector::from_iterator(e.len(), e.iter().zip(theta0).map(|(a, b)| a - b));
            Ok((&inv * diff * scale).iter().copied().collect())
        })
        .collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Serializable record of one estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub parameters: Vec<String>,
    pub words: Vec<String>,
    pub equations: Vec<String>,
    pub targets: Vec<f64>,
    pub r: usize,
    pub sample_size: Option<usize>,
    pub solutions: Vec<SolutionReport>,
    pub sigma: Option<Vec<Vec<f64>>>,
    /// More than one root in the box: the moments do not identify θ there.
    pub non_identifiable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub theta: Vec<f64>,
    pub residual: f64,
    pub d: Vec<Vec<f64>>,
    pub phi: Option<Vec<Vec<f64>>>,
    /// Present when a reference θ0 was supplied.
    pub normalized: Option<Vec<f64>>,
}

impl EstimateReport {
    /// Assembles D, Φ and (optionally) normalized estimates. Φ is evaluated
    /// at each solution, or at `theta0` when one is given.
    pub fn build(
        problem: &EstimationProblem,
        solutions: &[Solution],
        sigma: Option<&DMatrix<f64>>,
        theta0: Option<&[f64]>,
    ) -> Result<Self> {
        let mut reports = Vec::new();
        for s in solutions {
            let d = jacobian_d(problem, &s.theta)?;
            let (phi, normalized) = match sigma {
                Some(sigma) => {
                    let at = match theta0 {
                        Some(t0) => jacobian_d(problem, t0)?,
                        None => d.clone(),
                    };
                    let phi = asymptotic_phi(&at, sigma).ok();
                    let normalized = match (theta0, problem.sample_size) {
                        (Some(t0), Some(n)) => normalize_estimates(std::slice::from_ref(&s.theta), t0, &at, sigma, n)
                            .ok()
                            .and_then(|v| v.into_iter().next()),
                        _ => None,
                    };
                    (phi.as_ref().map(matrix_rows), normalized)
                }
                None => (None, None),
            };
            reports.push(SolutionReport {
                theta: s.theta.clone(),
                residual: s.residual,
                d: matrix_rows(&d),
                phi,
                normalized,
            });
        }
        Ok(Self {
            parameters: problem.vars.names().to_vec(),
            words: problem.words.iter().map(Word::to_string).collect(),
            equations: problem.equations.iter().map(MultiPoly::to_string).collect(),
            targets: problem.targets.clone(),
            r: problem.r,
            sample_size: problem.sample_size,
            solutions: reports,
            sigma: sigma.map(matrix_rows),
            non_identifiable: solutions.len() > 1,
        })
    }
}

/// Makes a parameter nonnegative (sign-ambiguous parameters such as a
/// diffusion coefficient entering only through even powers).
pub fn canonicalize_sign(theta: &[f64], indices: &[usize]) -> Vec<f64> {
    let mut out = theta.to_vec();
    for &i in indices {
        if let Some(v) = out.get_mut(i) {
            *v = v.abs();
        }
    }
    out
}

/// Counts how often each distinct root count occurs (diagnostics).
pub fn root_count_histogram(counts: &[usize]) -> HashMap<usize, usize> {
    let mut h = HashMap::new();
    for &c in counts {
        *h.entry(c).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vars {
        Vars::new(names).unwrap()
    }

    fn problem(names: &[&str], eqs: &[&str], targets: &[f64]) -> EstimationProblem {
        let v = vars(names);
        let equations = eqs.iter().map(|e| MultiPoly::parse(e, &v).unwrap()).collect();
        let words = (1..=eqs.len()).map(|k| Word::new(&vec![1; k], 1).unwrap()).collect();
        EstimationProblem::new(v, words, equations, targets.to_vec(), 1, Some(1)).unwrap()
    }

    #[test]
    fn linear_root() {
        let p = problem(&["th"], &["th/4"], &[0.25]);
        let s = solve_system(&p, &SolveOptions::new(vec![[-5.0, 5.0]])).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].theta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_roots() {
        let p = problem(&["a", "b"], &["(a-1)*(a-3)", "b-2"], &[0.0, 0.0]);
        let s = solve_system(&p, &SolveOptions::new(vec![[0.0, 5.0], [0.0, 5.0]])).unwrap();
        let roots: Vec<_> = s.iter().map(|s| s.theta.clone()).collect();
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0][0] - 1.0).abs() < 1e-10 && (roots[0][1] - 2.0).abs() < 1e-10);
        assert!((roots[1][0] - 3.0).abs() < 1e-10 && (roots[1][1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn no_roots_is_empty() {
        let p = problem(&["a"], &["a^2 + 1"], &[0.0]);
        assert!(solve_system(&p, &SolveOptions::new(vec![[-3.0, 3.0]])).unwrap().is_empty());
    }

    #[test]
    fn least_squares_overdetermined() {
        let p = problem(&["a"], &["a", "2*a"], &[1.0, 2.0]);
        let mut o = SolveOptions::new(vec![[-3.0, 3.0]]);
        assert!(solve_system(&p, &o).is_err());
        o.mode = SolveMode::LeastSquares;
        let s = solve_system(&p, &o).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].theta[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn jacobian_examples() {
        let p = problem(&["th", "c"], &["th/4", "3 + th"], &[0.0, 0.0]);
        let d = jacobian_d(&p, &[1.0, 5.0]).unwrap();
        assert_eq!(d[(0, 0)], 0.25);
        assert_eq!(d[(1, 0)], 0.0);
        assert_eq!(d[(1, 1)], 0.0);
    }

    #[test]
    fn covariance_examples() {
        let same = vec![vec![1.0, 2.0]; 5];
        assert_eq!(sample_covariance(&same).unwrap(), DMatrix::zeros(2, 2));
        let rows: Vec<Vec<f64>> = [1.0, 2.0, 4.0].iter().map(|&x| vec![x, 2.0 * x]).collect();
        let c = sample_covariance(&rows).unwrap();
        let v = c[(0, 0)];
        assert!((c[(0, 1)] - 2.0 * v).abs() < 1e-12 && (c[(1, 1)] - 4.0 * v).abs() < 1e-12);
        assert!(matches!(sample_covariance(&rows[..1]), Err(Error::TooFewSamples(1))));
    }

    #[test]
    fn normalization_examples() {
        let id = DMatrix::identity(2, 2);
        let out = normalize_estimates(&[vec![3.0, 5.0]], &[1.0, 1.0], &id, &id, 1).unwrap();
        assert_eq!(out[0], vec![2.0, 4.0]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let out = normalize_estimates(&[vec![2.0, 2.0]], &[1.0, 1.0], &d, &s, 1).unwrap();
        assert!((out[0][0] - 1.0).abs() < 1e-12 && (out[0][1] - 1.0).abs() < 1e-12);
        let singular = DMatrix::zeros(2, 2);
        assert!(matches!(
            normalize_estimates(&[vec![2.0, 2.0]], &[1.0, 1.0], &singular, &s, 1),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = psd_sqrt(&s).unwrap();
        assert!((&r * &r - &s).amax() < 1e-12);
    }
}
