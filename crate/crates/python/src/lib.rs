//! Python module `esme`.

use esme_core::drivers::{expected_sig_time_bm, sample_fbm, SymbolicTimeBm};
use esme_core::estimator::solve_system;
use esme_core::experiment::{self, ExperimentConfig};
use esme_core::{
    expected_lifted_signature, lift_to_word, path_signature, picard_level1, picard_level1_anchored, shuffle,
    MultiPoly, PicardExpansion, SampledPath, Vars, Word,
};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

create_exception!(esme, EsmeError, PyValueError);

fn err(e: esme_core::Error) -> PyErr {
    EsmeError::new_err(e.to_string())
}

fn word(letters: &[usize], alphabet_size: usize) -> PyResult<Word> {
    Word::new(letters, alphabet_size).map_err(err)
}

fn path(times: Vec<f64>, values: Vec<Vec<f64>>) -> PyResult<SampledPath> {
    SampledPath::new(times, values).map_err(err)
}

fn word_key<'py>(py: Python<'py>, w: &Word) -> PyResult<Bound<'py, PyTuple>> {
    PyTuple::new(py, w.letters())
}

fn json_loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Exact multivariate polynomial with rational coefficients.
#[pyclass(name = "Poly", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPoly(MultiPoly);

#[pymethods]
impl PyPoly {
    #[new]
    fn new(text: &str, vars: Vec<String>) -> PyResult<Self> {
        let vars = Vars::new(&vars).map_err(err)?;
        Ok(Self(MultiPoly::parse(text, &vars).map_err(err)?))
    }

    #[getter]
    fn vars(&self) -> Vec<String> {
        self.0.vars().names().to_vec()
    }

    fn num_terms(&self) -> usize {
        self.0.num_terms()
    }

    fn degree(&self) -> Option<u32> {
        self.0.degree()
    }

    /// Floating-point value at `point`, one entry per variable.
    fn eval(&self, point: Vec<f64>) -> PyResult<f64> {
        if point.len() != self.0.vars().len() {
            return Err(EsmeError::new_err(format!(
                "expected {} values, got {}",
                self.0.vars().len(),
                point.len()
            )));
        }
        Ok(self.0.eval(&point))
    }

    fn diff(&self, var: &str) -> PyResult<Self> {
        Ok(Self(self.0.diff(var).map_err(err)?))
    }

    fn __add__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self(self.0.try_add(&other.0).map_err(err)?))
    }

    fn __sub__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self(self.0.try_sub(&other.0).map_err(err)?))
    }

    fn __mul__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self(self.0.try_mul(&other.0).map_err(err)?))
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Poly('{}', {:?})", self.0, self.0.vars().names())
    }
}

/// Coefficients of a response signature entry in driver words.
#[pyclass(name = "Expansion", frozen)]
struct PyExpansion(PicardExpansion);

#[pymethods]
impl PyExpansion {
    #[getter]
    fn tau(&self) -> Vec<usize> {
        self.0.tau().letters()
    }

    #[getter]
    fn r(&self) -> usize {
        self.0.r()
    }

    /// Names of the coefficient variables, in evaluation order.
    #[getter]
    fn vars(&self) -> Vec<String> {
        self.0.vars().names().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn max_word_len(&self) -> usize {
        self.0.max_word_len()
    }

    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (sigma, alpha) in self.0.coefficients() {
            out.set_item(word_key(py, sigma)?, PyPoly(alpha.clone()))?;
        }
        Ok(out)
    }

    /// Value on a realised driver path for the coefficient variables `point`.
    fn evaluate(&self, times: Vec<f64>, values: Vec<Vec<f64>>, point: Vec<f64>) -> PyResult<f64> {
        let sig = path_signature(&path(times, values)?, self.0.max_word_len());
        self.0.evaluate_on(&sig, &point).map_err(err)
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_loads(py, &self.0.to_json().to_string())
    }
}

/// Polynomial vector field `f(y; θ)`, one row per state coordinate.
#[pyclass(name = "VectorField", frozen)]
struct PyVectorField(esme_core::VectorField);

impl PyVectorField {
    fn level1(&self, r: usize, y0: Option<Vec<f64>>) -> PyResult<Vec<PicardExpansion>> {
        match y0 {
            Some(y0) => picard_level1_anchored(&self.0, r, &y0),
            None => picard_level1(&self.0, r),
        }
        .map_err(err)
    }
}

#[pymethods]
impl PyVectorField {
    #[new]
    fn new(parameters: Vec<String>, state: Vec<String>, field: Vec<Vec<String>>) -> PyResult<Self> {
        Ok(Self(esme_core::VectorField::parse(&parameters, &state, &field).map_err(err)?))
    }

    #[getter]
    fn parameters(&self) -> Vec<String> {
        self.0.parameters().to_vec()
    }

    #[getter]
    fn state(&self) -> Vec<String> {
        self.0.state().to_vec()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.0.state_dim()
    }

    #[getter]
    fn driver_dim(&self) -> usize {
        self.0.driver_dim()
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.0.q()
    }

    /// Picard expansion of the response word `tau` after `r` steps. Without
    /// `y0` the initial value stays symbolic.
    #[pyo3(signature = (tau, r, y0=None))]
    fn expansion(&self, tau: Vec<usize>, r: usize, y0: Option<Vec<f64>>) -> PyResult<PyExpansion> {
        let level1 = self.level1(r, y0)?;
        let tau = word(&tau, self.0.state_dim())?;
        Ok(PyExpansion(lift_to_word(&level1, &tau).map_err(err)?))
    }

    /// `E[Y(r)^tau]` under the `(t, W)` driver with the horizon as the
    /// symbol `time_var`.
    #[pyo3(signature = (tau, r, y0, time_var="t"))]
    fn expected_moment(&self, tau: Vec<usize>, r: usize, y0: Vec<f64>, time_var: &str) -> PyResult<PyPoly> {
        let level1 = self.level1(r, Some(y0))?;
        let tau = word(&tau, self.0.state_dim())?;
        let driver = SymbolicTimeBm::new(self.0.driver_dim(), time_var).map_err(err)?;
        Ok(PyPoly(expected_lifted_signature(&level1, &tau, &driver).map_err(err)?))
    }
}

/// Configured experiment: model, driver, simulation and solver settings.
#[pyclass(name = "Experiment", frozen)]
struct PyExperiment(experiment::Experiment);

impl PyExperiment {
    fn build(config: ExperimentConfig, base_dir: &str) -> PyResult<Self> {
        Ok(Self(experiment::Experiment::new(config, base_dir).map_err(err)?))
    }
}

#[pymethods]
impl PyExperiment {
    #[new]
    #[pyo3(signature = (config_json, base_dir="."))]
    fn new(config_json: &str, base_dir: &str) -> PyResult<Self> {
        Self::build(ExperimentConfig::from_json_str(config_json).map_err(err)?, base_dir)
    }

    #[staticmethod]
    fn diffusion_example() -> PyResult<Self> {
        Self::build(experiment::diffusion_example(), ".")
    }

    #[staticmethod]
    fn fbm_example() -> PyResult<Self> {
        Self::build(experiment::fbm_example(), ".")
    }

    #[getter]
    fn hash(&self) -> String {
        self.0.hash().to_string()
    }

    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_loads(py, &self.0.config().to_canonical_json())
    }

    /// Exact moments `E^τ_r(θ)` for every configured word.
    fn theoretical_moments(&self, py: Python<'_>, theta: Vec<f64>) -> PyResult<Vec<f64>> {
        py.detach(|| {
            let exps = self.0.expansions()?;
            let driver = self.0.driver_expectation(&exps)?;
            self.0.theoretical_moments(&exps, driver.as_ref(), &theta)
        })
        .map_err(err)
    }

    /// Roots of the moment system with `targets` in place of sample means.
    fn solve(&self, py: Python<'_>, targets: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        py.detach(|| {
            let exps = self.0.expansions()?;
            let driver = self.0.driver_expectation(&exps)?;
            let problem = self.0.system(&exps, driver.as_ref(), &targets, None)?;
            let solutions = solve_system(&problem, &self.0.solve_options())?;
            Ok(solutions.into_iter().map(|s| s.theta).collect())
        })
        .map_err(err)
    }

    /// Runs every replication; returns `(rows, summary)` as plain dicts.
    fn replicate<'py>(&self, py: Python<'py>) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
        let (rows, summary) = py.detach(|| self.0.replicate()).map_err(err)?;
        let rows = serde_json::to_string(&rows).map_err(|e| EsmeError::new_err(e.to_string()))?;
        let summary = serde_json::to_string(&summary).map_err(|e| EsmeError::new_err(e.to_string()))?;
        Ok((json_loads(py, &rows)?, json_loads(py, &summary)?))
    }
}

/// Shuffle product of two words as `{word: multiplicity}`.
#[pyfunction]
fn shuffle_product<'py>(py: Python<'py>, w1: Vec<usize>, w2: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
    let n = w1.iter().chain(&w2).copied().max().unwrap_or(1);
    let product = shuffle(&word(&w1, n)?, &word(&w2, n)?).map_err(err)?;
    let out = PyDict::new(py);
    for (w, k) in product.iter() {
        out.set_item(word_key(py, w)?, k)?;
    }
    Ok(out)
}

/// Truncated signature of a piecewise-linear path as `{word: value}`.
#[pyfunction]
fn signature<'py>(py: Python<'py>, times: Vec<f64>, values: Vec<Vec<f64>>, level: usize) -> PyResult<Bound<'py, PyDict>> {
    let sig = path_signature(&path(times, values)?, level);
    let out = PyDict::new(py);
    for (w, x) in sig.entries() {
        out.set_item(word_key(py, &w)?, x)?;
    }
    Ok(out)
}

/// Expected signature of `(t, W_t)` on `[0, horizon]`.
#[pyfunction]
fn expected_signature_time_bm<'py>(py: Python<'py>, horizon: f64, level: usize) -> PyResult<Bound<'py, PyDict>> {
    let e = expected_sig_time_bm(horizon, level);
    let out = PyDict::new(py);
    for (w, x) in e.values() {
        out.set_item(word_key(py, w)?, *x)?;
    }
    Ok(out)
}

/// One fBM sample `B^h` on a uniform grid: `(times, values)`.
#[pyfunction]
fn fbm_path(hurst: f64, horizon: f64, dt: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = sample_fbm(hurst, horizon, dt, seed).map_err(err)?;
    Ok((p.times().to_vec(), p.values().to_vec()))
}

#[pymodule]
fn esme(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EsmeError", m.py().get_type::<EsmeError>())?;
    m.add_class::<PyPoly>()?;
    m.add_class::<PyExpansion>()?;
    m.add_class::<PyVectorField>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(shuffle_product, m)?)?;
    m.add_function(wrap_pyfunction!(signature, m)?)?;
    m.add_function(wrap_pyfunction!(expected_signature_time_bm, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_path, m)?)?;
    Ok(())
}
