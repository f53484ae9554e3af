//! Python bindings: problems, reference solutions, schedule checks and runs.

use pdflow_core::experiment::{
    self, preset, Preset, PresetOptions, RunResult, RunSpec, METRIC_COLUMNS,
};
use pdflow_core::problem::{builtin, Builtin, SeparableProblem, Vector};
use pdflow_core::schedules::{validate_regimes as check_regimes, Curve};
use pdflow_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_value<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn vec(v: Vec<f64>) -> Vector {
    Vector::from_vec(v)
}

/// A separable convex instance `min f(x) + g(y)` subject to `Ax + By = b`.
#[pyclass(name = "Problem", module = "pdflow", frozen)]
struct PyProblem {
    inner: SeparableProblem,
}

#[pymethods]
impl PyProblem {
    /// Built-in instance from a JSON object such as `{"builtin": "example2"}`.
    #[staticmethod]
    fn builtin(spec: &str) -> PyResult<Self> {
        let b: Builtin =
            serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: builtin(&b).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: SeparableProblem::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    /// `(n1, n2, m)`.
    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        (self.inner.n1(), self.inner.n2(), self.inner.m())
    }

    fn objective(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.objective(&vec(x), &vec(y)).map_err(to_py)
    }

    fn constraint_residual(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .constraint_residual(&vec(x), &vec(y))
            .map_err(to_py)?
            .as_slice()
            .to_vec())
    }

    fn aug_lagrangian(&self, x: Vec<f64>, y: Vec<f64>, lam: Vec<f64>) -> PyResult<f64> {
        self.inner
            .aug_lagrangian(&vec(x), &vec(y), &vec(lam))
            .map_err(to_py)
    }

    fn kkt_residual(&self, x: Vec<f64>, y: Vec<f64>, lam: Vec<f64>) -> PyResult<f64> {
        self.inner
            .kkt_residual(&vec(x), &vec(y), &vec(lam))
            .map_err(to_py)
    }

    /// Saddle point, optimal value and minimal-norm solution as a dict.
    fn saddle_point<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_value(py, &self.inner.solve_saddle_point().map_err(to_py)?)
    }

    fn min_norm_solution(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (x, y) = self.inner.min_norm_solution().map_err(to_py)?;
        Ok((x.as_slice().to_vec(), y.as_slice().to_vec()))
    }

    /// Minimizer of the augmented Lagrangian at `lambda_bar` plus `eps/2 ‖(x, y)‖²`.
    fn tikhonov_minimizer(&self, lambda_bar: Vec<f64>, eps: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (x, y) = self
            .inner
            .tikhonov_minimizer(&vec(lambda_bar), eps)
            .map_err(to_py)?;
        Ok((x.as_slice().to_vec(), y.as_slice().to_vec()))
    }
}

/// Result of a simulated run.
#[pyclass(name = "RunResult", module = "pdflow", frozen)]
struct PyRunResult {
    inner: RunResult,
}

#[pymethods]
impl PyRunResult {
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_value(py, &self.inner.report)
    }

    /// Metric columns keyed by name; undefined entries are NaN.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (name, col) in METRIC_COLUMNS.iter().zip(self.inner.metric_columns()) {
            d.set_item(*name, col)?;
        }
        Ok(d)
    }

    fn trajectory_csv(&self) -> String {
        self.inner.trajectory_csv()
    }

    fn metrics_csv(&self) -> String {
        self.inner.metrics_csv()
    }

    #[pyo3(signature = (dir, charts = false))]
    fn write(&self, dir: &str, charts: bool) -> PyResult<()> {
        self.inner
            .write(std::path::Path::new(dir), charts)
            .map_err(to_py)
    }
}

/// Names of the built-in experiments.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    experiment::PRESETS.to_vec()
}

/// JSON specification of a preset, with optional overrides.
#[pyfunction]
#[pyo3(signature = (name, r = None, eps_on = None, mned = None))]
fn preset_spec(
    name: &str,
    r: Option<f64>,
    eps_on: Option<bool>,
    mned: Option<[f64; 4]>,
) -> PyResult<String> {
    let text = match preset(name, &PresetOptions { r, eps_on, mned }).map_err(to_py)? {
        Preset::Run(s) => s.to_json(),
        Preset::Sweep(s) => serde_json::to_string_pretty(&s).map_err(Error::from),
        Preset::Compare(s) => serde_json::to_string_pretty(&s).map_err(Error::from),
    };
    text.map_err(to_py)
}

/// Simulates a run specification given as JSON.
#[pyfunction]
fn run(py: Python<'_>, spec: &str) -> PyResult<PyRunResult> {
    let spec = RunSpec::from_json(spec).map_err(to_py)?;
    let inner = py.detach(|| experiment::execute(&spec)).map_err(to_py)?;
    Ok(PyRunResult { inner })
}

/// Checks a run specification without simulating; returns the report text.
#[pyfunction]
fn validate(spec: &str) -> PyResult<String> {
    let spec = RunSpec::from_json(spec).map_err(to_py)?;
    Ok(experiment::cmd_validate(&spec).map_err(to_py)?.0)
}

/// Convergence hypotheses for `beta = cb t^rb` and `eps = ce t^re` from `t0`.
#[pyfunction]
#[pyo3(signature = (cb, rb, ce, re, gamma, delta, t0 = 1.0))]
#[allow(clippy::too_many_arguments)]
fn validate_regimes<'py>(
    py: Python<'py>,
    cb: f64,
    rb: f64,
    ce: f64,
    re: f64,
    gamma: f64,
    delta: f64,
    t0: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let beta = Curve::power(cb, rb, t0).map_err(to_py)?;
    let eps = Curve::power(ce, re, t0).map_err(to_py)?;
    json_value(
        py,
        &check_regimes(&beta, &eps, gamma, delta).map_err(to_py)?,
    )
}

#[pymodule]
fn pdflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset_spec, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_regimes, m)?)?;
    m.add("METRIC_COLUMNS", METRIC_COLUMNS.to_vec())?;
    Ok(())
}
