//! Python bindings: grids, density fields, profiles, diagnostics and the
//! scenario runner.

use std::path::PathBuf;
use std::sync::Arc;

use ksdrift_core::config::{load_config, parse_config, ScenarioConfig};
use ksdrift_core::{diagnostics, kernel, profiles, scenario};
use ksdrift_core::{DensityField, Error, Grid, StepControl};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::StepUnderflow { .. } | Error::Json(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Uniform finite-volume grid on `[0, length]`.
#[pyclass(name = "Grid", module = "ksdrift", frozen)]
struct PyGrid {
    inner: Arc<Grid>,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(length: f64, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(Grid::uniform(length, n).map_err(py_err)?),
        })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length()
    }

    #[getter]
    fn centers(&self) -> Vec<f64> {
        self.inner.centers().to_vec()
    }

    #[getter]
    fn widths(&self) -> Vec<f64> {
        self.inner.widths().to_vec()
    }

    #[getter]
    fn edges(&self) -> Vec<f64> {
        self.inner.edges().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(length={}, n={})", self.inner.length(), self.inner.len())
    }
}

/// Nonnegative cell averages on a grid.
#[pyclass(name = "DensityField", module = "ksdrift", frozen)]
struct PyField {
    inner: DensityField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        let inner = DensityField::new(grid.inner.clone(), values).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Cell averages of `α e^{-αx}`.
    #[staticmethod]
    fn stationary(alpha: f64, grid: &PyGrid) -> PyResult<Self> {
        let inner = profiles::stationary_profile(alpha, grid.inner.clone()).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Cell averages of `α exp(-αy - y²/2)`.
    #[staticmethod]
    fn selfsimilar(alpha: f64, grid: &PyGrid) -> PyResult<Self> {
        let inner = profiles::selfsimilar_profile(alpha, grid.inner.clone()).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid {
            inner: self.inner.grid_arc().clone(),
        }
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn normalized_to(&self, mass: f64) -> PyResult<Self> {
        let inner = self.inner.normalized_to(mass).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn is_nonincreasing(&self) -> bool {
        self.inner.is_nonincreasing()
    }

    fn first_moment(&self) -> f64 {
        diagnostics::first_moment(&self.inner)
    }

    fn second_moment(&self) -> f64 {
        diagnostics::second_moment(&self.inner)
    }

    fn entropy(&self) -> f64 {
        diagnostics::entropy(&self.inner)
    }

    fn fisher(&self) -> f64 {
        diagnostics::fisher(&self.inner)
    }

    fn boundary_value(&self) -> f64 {
        diagnostics::boundary_value(&self.inner)
    }

    /// `M I - b²`; `b` defaults to the extracted boundary value.
    #[pyo3(signature = (b=None))]
    fn trace_residual(&self, b: Option<f64>) -> f64 {
        let b = b.unwrap_or_else(|| diagnostics::boundary_value(&self.inner));
        diagnostics::trace_residual(&self.inner, b)
    }

    fn relative_entropy(&self, reference: &PyField) -> PyResult<f64> {
        diagnostics::relative_entropy(&self.inner, &reference.inner).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn __repr__(&self) -> String {
        format!("DensityField(n={}, mass={})", self.inner.values().len(), self.inner.mass())
    }
}

/// Validated scenario configuration.
#[pyclass(name = "ScenarioConfig", module = "ksdrift")]
struct PyConfig {
    inner: ScenarioConfig,
}

fn outcome_to_py<'py>(py: Python<'py>, outcome: &scenario::ScenarioOutcome) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("summary", to_py(py, &outcome.summary)?)?;
    dict.set_item("records", to_py(py, &outcome.records)?)?;
    dict.set_item("x", outcome.final_field.grid().centers().to_vec())?;
    dict.set_item("n", outcome.final_field.values().to_vec())?;
    Ok(dict)
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_config(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_config(&path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::preset(name).map_err(py_err)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_config_text()
    }

    #[getter]
    fn regime(&self) -> &'static str {
        self.inner.regime.as_str()
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.seed_label.clone()
    }

    #[getter]
    fn output_path(&self) -> PathBuf {
        self.inner.output_path.clone()
    }

    #[setter]
    fn set_output_path(&mut self, path: PathBuf) {
        self.inner.output_path = path;
    }

    fn initial_field(&self) -> PyResult<PyField> {
        Ok(PyField {
            inner: self.inner.initial_field().map_err(py_err)?,
        })
    }

    /// Runs without writing files; returns summary, records and final profile.
    fn execute<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let config = self.inner.clone();
        let outcome = py.detach(move || scenario::execute_scenario(&config)).map_err(py_err)?;
        outcome_to_py(py, &outcome)
    }

    /// Runs and writes `timeseries.csv`, `summary.json` and
    /// `final_profile.csv` under `output_path`; returns the summary.
    fn run<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let config = self.inner.clone();
        let summary = py.detach(move || scenario::run_scenario(&config)).map_err(py_err)?;
        to_py(py, &summary)
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioConfig(label={:?}, regime={}, M={})",
            self.inner.seed_label,
            self.inner.regime.as_str(),
            self.inner.mass
        )
    }
}

#[pyfunction]
fn mass_relation_p(alpha: f64) -> f64 {
    profiles::mass_relation_p(alpha)
}

#[pyfunction]
fn solve_alpha_for_mass(mass: f64) -> PyResult<f64> {
    profiles::solve_alpha_for_mass(mass).map_err(py_err)
}

#[pyfunction]
fn blowup_time_bound(mass: f64, first_moment: f64) -> PyResult<f64> {
    kernel::blowup_time_bound(mass, first_moment).map_err(py_err)
}

/// `(μ̄, α)` of the coupled equilibrium for total mass `M > 1`.
#[pyfunction]
fn coupled_equilibrium(total_mass: f64) -> PyResult<(f64, f64)> {
    let (mu_bar, profile) = profiles::coupled_equilibrium(total_mass).map_err(py_err)?;
    Ok((mu_bar, profile.alpha()))
}

/// Physical-frame run; returns the blow-up certificate, the records and
/// the final profile.
#[pyfunction]
#[pyo3(signature = (field, t_final, diag_every=100, dt_initial=1e-4, blowup_threshold=1e6))]
fn run_physical<'py>(
    py: Python<'py>,
    field: &PyField,
    t_final: f64,
    diag_every: usize,
    dt_initial: f64,
    blowup_threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let control = StepControl {
        dt_initial,
        blowup_threshold,
        ..StepControl::default()
    };
    let initial = field.inner.clone();
    let run = py
        .detach(move || kernel::run(initial, t_final, &control, diag_every))
        .map_err(py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("certificate", to_py(py, &run.certificate)?)?;
    dict.set_item("records", to_py(py, &run.records)?)?;
    dict.set_item("time", run.state.time)?;
    dict.set_item("n", run.state.field.values().to_vec())?;
    Ok(dict)
}

#[pyfunction]
#[pyo3(signature = (start, stop, steps, cells=4000, t_final=20.0))]
fn sweep_mass<'py>(
    py: Python<'py>,
    start: f64,
    stop: f64,
    steps: usize,
    cells: usize,
    t_final: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let grid = Grid::uniform(40.0, cells).map_err(py_err)?;
    let entries = py
        .detach(move || scenario::sweep_mass(start, stop, steps, &grid, &StepControl::default(), t_final))
        .map_err(py_err)?;
    to_py(py, &entries)
}

#[pymodule]
fn ksdrift(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(mass_relation_p, m)?)?;
    m.add_function(wrap_pyfunction!(solve_alpha_for_mass, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_time_bound, m)?)?;
    m.add_function(wrap_pyfunction!(coupled_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(run_physical, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_mass, m)?)?;
    m.add("PRESETS", scenario::PRESETS.to_vec())?;
    Ok(())
}
