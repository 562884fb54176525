//! Python bindings. Reports come back as plain dicts.

use ::lpvq as core;
use core::quantizer::{self, QuantizerConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Norm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNorm {
    inner: core::Norm,
}

#[pymethods]
impl PyNorm {
    #[new]
    fn new(spec: &str, dim: usize) -> PyResult<Self> {
        Ok(PyNorm { inner: core::Norm::parse(spec, dim).map_err(err)? })
    }

    fn eval(&self, z: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&z).map_err(err)
    }

    fn dual(&self, g: Vec<f64>) -> f64 {
        self.inner.dual(&g)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Norm('{}', {})", self.inner.kind(), self.inner.dim())
    }
}

#[pyclass(name = "MeasureSpace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMeasureSpace {
    inner: core::MeasureSpace,
}

#[pymethods]
impl PyMeasureSpace {
    #[new]
    #[pyo3(signature = (atoms, infinite_mass = false))]
    fn new(atoms: Vec<(f64, Vec<f64>)>, infinite_mass: bool) -> PyResult<Self> {
        Ok(PyMeasureSpace { inner: core::MeasureSpace::from_pairs(atoms, infinite_mass).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMeasureSpace { inner: core::MeasureSpace::from_json_str(text).map_err(err)? })
    }

    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        Ok(PyMeasureSpace { inner: core::MeasureSpace::from_path(path.as_ref()).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn infinite_mass(&self) -> bool {
        self.inner.infinite_mass()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn lp_norm(&self, norm: &PyNorm, p: f64) -> PyResult<f64> {
        self.inner.lp_norm(&norm.inner, p).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "SimpleFunction", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySimpleFunction {
    inner: core::SimpleFunction,
}

#[pymethods]
impl PySimpleFunction {
    #[new]
    #[pyo3(signature = (centers, assignment, background = None))]
    fn new(centers: Vec<Vec<f64>>, assignment: Vec<usize>, background: Option<usize>) -> Self {
        PySimpleFunction { inner: core::SimpleFunction::new(centers, assignment, background) }
    }

    #[getter]
    fn centers(&self) -> Vec<Vec<f64>> {
        self.inner.centers.clone()
    }

    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.inner.assignment.clone()
    }

    #[getter]
    fn background(&self) -> Option<usize> {
        self.inner.background
    }

    fn cost(&self, space: &PyMeasureSpace, norm: &PyNorm, p: f64) -> PyResult<f64> {
        self.inner.cost(&space.inner, &norm.inner, p).map_err(err)
    }

    fn reduce(&self, space: &PyMeasureSpace) -> Self {
        PySimpleFunction { inner: self.inner.reduce(&space.inner) }
    }

    fn degree(&self, space: &PyMeasureSpace) -> usize {
        self.inner.degree(&space.inner)
    }

    fn __repr__(&self) -> String {
        format!("SimpleFunction(k={})", self.inner.k())
    }
}

#[pyfunction]
#[pyo3(signature = (space, cell, norm, p, tol = 1e-9, max_iter = 10_000))]
fn solve_pmean<'py>(
    py: Python<'py>,
    space: &PyMeasureSpace,
    cell: Vec<usize>,
    norm: &PyNorm,
    p: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let r = if p.is_infinite() {
        core::pmean::chebyshev_center(&space.inner, &cell, &norm.inner, tol)
    } else {
        core::pmean::solve_pmean(&space.inner, &cell, &norm.inner, p, tol, max_iter)
    };
    to_py(py, &r.map_err(err)?)
}

#[allow(clippy::too_many_arguments)]
fn config(
    p: f64,
    k: usize,
    restarts: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
    tie_tol: f64,
    pinned_zero: bool,
    jobs: usize,
) -> QuantizerConfig {
    QuantizerConfig { p, k, restarts, seed, tol, max_iter, tie_tol, pinned_zero, jobs }
}

/// Returns `(best, report)`.
#[pyfunction]
#[pyo3(signature = (space, norm, p, k, restarts = 10, seed = 0, tol = 1e-9, max_iter = 1000,
                    tie_tol = 1e-9, pinned_zero = false, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn quantize<'py>(
    py: Python<'py>,
    space: &PyMeasureSpace,
    norm: &PyNorm,
    p: f64,
    k: usize,
    restarts: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
    tie_tol: f64,
    pinned_zero: bool,
    jobs: usize,
) -> PyResult<(PySimpleFunction, Bound<'py, PyAny>)> {
    let cfg = config(p, k, restarts, seed, tol, max_iter, tie_tol, pinned_zero, jobs);
    let report = py.detach(|| quantizer::lloyd(&space.inner, &norm.inner, &cfg)).map_err(err)?;
    Ok((PySimpleFunction { inner: report.best.clone() }, to_py(py, &report)?))
}

#[pyfunction]
#[pyo3(signature = (space, norm, function, p, tie_tol = 1e-9))]
fn certify<'py>(
    py: Python<'py>,
    space: &PyMeasureSpace,
    norm: &PyNorm,
    function: &PySimpleFunction,
    p: f64,
    tie_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = QuantizerConfig { p, k: function.inner.k().max(1), tie_tol, ..Default::default() };
    to_py(py, &quantizer::certify(&space.inner, &norm.inner, &cfg, &function.inner).map_err(err)?)
}

#[pyfunction]
fn brute_force<'py>(
    py: Python<'py>,
    space: &PyMeasureSpace,
    norm: &PyNorm,
    p: f64,
    k: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| core::oracle::brute_force(&space.inner, &norm.inner, p, k)).map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
fn pylpvq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNorm>()?;
    m.add_class::<PyMeasureSpace>()?;
    m.add_class::<PySimpleFunction>()?;
    m.add_function(wrap_pyfunction!(solve_pmean, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    Ok(())
}
