//! Python module `pysoftedge`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use softedge::fredholm::{self, NystromGrid};
use softedge::kernel::{self, EnsembleKind};
use softedge::quad::QuadratureSpec;
use softedge::testfn;
use softedge::{bwasym, edgestats, mcsim, specfun};

create_exception!(pysoftedge, NumericalError, PyArithmeticError);

fn to_py(e: softedge::Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn spec(tol: Option<f64>) -> PyResult<QuadratureSpec> {
    let s = match tol {
        Some(t) => QuadratureSpec::default().with_tol(t, t),
        None => QuadratureSpec::default(),
    };
    s.validate().map_err(to_py)?;
    Ok(s)
}

fn default_grid() -> PyResult<NystromGrid> {
    let (a, b) = fredholm::DEFAULT_WINDOW;
    NystromGrid::composite(a, b, fredholm::DEFAULT_PANELS, fredholm::DEFAULT_NODES_PER_PANEL).map_err(to_py)
}

/// A random matrix ensemble: gue, gse, goe, lue, lse or loe, with the
/// Laguerre exponent alpha.
#[pyclass(name = "Ensemble", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyEnsemble(EnsembleKind);

#[pymethods]
impl PyEnsemble {
    #[new]
    #[pyo3(signature = (name, alpha = 0.0))]
    fn new(name: &str, alpha: f64) -> PyResult<Self> {
        let k = EnsembleKind::parse(name, alpha).map_err(to_py)?;
        k.validate().map_err(to_py)?;
        Ok(PyEnsemble(k))
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta.value()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    /// (center, stat_scale) of the edge map xi = stat_scale * (x - center).
    fn scaling(&self, n: usize) -> PyResult<(f64, f64)> {
        let s = kernel::EdgeScaling::new(self.0, n).map_err(to_py)?;
        Ok((s.center, s.stat_scale))
    }

    fn __repr__(&self) -> String {
        format!("Ensemble('{}', alpha={})", self.0.name(), self.0.alpha)
    }
}

/// Test function parsed from "gauss:a,c", "polygauss:k,a", "sech2:a" or "zero".
#[pyclass(name = "TestFunction", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTestFunction {
    spec: String,
    f: testfn::TestFunction,
}

#[pymethods]
impl PyTestFunction {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let f = testfn::TestFunction::parse(spec).map_err(to_py)?;
        Ok(PyTestFunction { spec: spec.to_string(), f })
    }

    fn __call__(&self, x: f64) -> f64 {
        self.f.eval(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.f.derivative(x)
    }

    fn shifted(&self, s: f64) -> Self {
        PyTestFunction { spec: format!("({})(x - {s})", self.spec), f: self.f.shifted(s) }
    }

    fn __repr__(&self) -> String {
        format!("TestFunction('{}')", self.spec)
    }
}

#[pyfunction]
fn airy_ai(x: f64) -> f64 {
    specfun::airy_ai(x)
}

#[pyfunction]
fn airy_ai_prime(x: f64) -> f64 {
    specfun::airy_ai_prime(x)
}

/// Integral of Ai from x to infinity.
#[pyfunction]
fn airy_primitive(x: f64) -> f64 {
    specfun::airy_primitive(x)
}

#[pyfunction]
fn b_function(x: f64) -> f64 {
    specfun::b_function(x)
}

#[pyfunction]
fn airy_kernel(x: f64, y: f64) -> f64 {
    kernel::airy_kernel(x, y)
}

#[pyfunction]
fn l_function(x: f64, y: f64) -> PyResult<f64> {
    kernel::l_function(x, y).map_err(to_py)
}

/// Finite-N kernel in edge coordinates.
#[pyfunction]
fn scaled_edge_kernel(ensemble: &PyEnsemble, n: usize, x: f64, y: f64) -> PyResult<f64> {
    kernel::scaled_edge_kernel(ensemble.0, n, x, y).map_err(to_py)
}

/// Sup error against the Airy kernel on the default grid for each N, and the
/// log-log slope when at least two N are given.
#[pyfunction]
fn kernel_convergence(ensemble: &PyEnsemble, ns: Vec<usize>) -> PyResult<(Vec<f64>, Option<f64>)> {
    let grid = kernel::default_rate_grid();
    let errs = ns
        .iter()
        .map(|&n| kernel::edge_kernel_sup_error(ensemble.0, n, &grid))
        .collect::<softedge::Result<Vec<f64>>>()
        .map_err(to_py)?;
    let slope = if ns.len() >= 2 { Some(kernel::rate_slope(&ns, &errs).map_err(to_py)?) } else { None };
    Ok((errs, slope))
}

fn terms_dict<'py>(py: Python<'py>, terms: &BTreeMap<String, f64>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in terms {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Leading-order mean and variance with the per-term breakdown.
#[pyfunction]
#[pyo3(signature = (ensemble, f, tol = None))]
fn moment_formulas<'py>(py: Python<'py>, ensemble: &PyEnsemble, f: &PyTestFunction, tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = edgestats::moment_formulas(ensemble.0, &f.f, &spec(tol)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean", r.mean)?;
    d.set_item("variance", r.variance)?;
    d.set_item("quad_err", r.quad_err)?;
    d.set_item("terms", terms_dict(py, &r.per_term_values)?)?;
    d.set_item("caveat", r.caveat)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (ensemble, f, tol = None))]
fn mean_asymptotic(ensemble: &PyEnsemble, f: &PyTestFunction, tol: Option<f64>) -> PyResult<f64> {
    edgestats::mean_asymptotic(ensemble.0, &f.f, &spec(tol)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (ensemble, f, tol = None))]
fn variance_asymptotic(ensemble: &PyEnsemble, f: &PyTestFunction, tol: Option<f64>) -> PyResult<f64> {
    edgestats::variance_asymptotic(ensemble.0, &f.f, &spec(tol)?).map_err(to_py)
}

/// Mean and variance in the Airy limit from the Fredholm determinant.
#[pyfunction]
fn airy_moments(f: &PyTestFunction) -> PyResult<(f64, f64)> {
    Ok(fredholm::airy_moments(&f.f, &default_grid()?))
}

/// Exact finite-N mean and variance for the beta = 2 ensembles.
#[pyfunction]
fn finite_n_moments(ensemble: &PyEnsemble, n: usize, f: &PyTestFunction) -> PyResult<(f64, f64)> {
    fredholm::finite_n_moments(ensemble.0, n, &f.f, &default_grid()?).map_err(to_py)
}

/// log E exp(-lambda sum f) at finite N (beta = 2).
#[pyfunction]
fn mgf_finite_n(ensemble: &PyEnsemble, n: usize, f: &PyTestFunction, lambda_: f64) -> PyResult<f64> {
    fredholm::mgf_finite_n_unitary(ensemble.0, n, &f.f, lambda_, &default_grid()?).map_err(to_py)
}

/// Ascending eigenvalues of one draw.
#[pyfunction]
fn sample_eigenvalues(ensemble: &PyEnsemble, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    Ok(mcsim::sample_eigenvalues(ensemble.0, n, seed).map_err(to_py)?.eigenvalues)
}

/// Edge-scaled linear statistics, one per draw.
#[pyfunction]
fn sample_statistics(py: Python<'_>, ensemble: &PyEnsemble, n: usize, f: &PyTestFunction, n_samples: usize, seed: u64) -> PyResult<Vec<f64>> {
    let ens = ensemble.0;
    let func = f.f.clone();
    py.detach(move || mcsim::sample_statistics(ens, n, &func, n_samples, seed)).map_err(to_py)
}

#[pyfunction]
fn estimate_moments<'py>(
    py: Python<'py>,
    ensemble: &PyEnsemble,
    n: usize,
    f: &PyTestFunction,
    n_samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let ens = ensemble.0;
    let func = f.f.clone();
    let m = py.detach(move || mcsim::estimate_moments(ens, n, &func, n_samples, seed)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean", m.mean)?;
    d.set_item("variance", m.variance)?;
    d.set_item("stderr_mean", m.stderr_mean)?;
    d.set_item("stderr_variance", m.stderr_var)?;
    d.set_item("n_samples", m.n_samples)?;
    d.set_item("seed", m.seed)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (f, lambda_, gamma, tol = None))]
fn basor_widom<'py>(py: Python<'py>, f: &PyTestFunction, lambda_: f64, gamma: f64, tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = bwasym::basor_widom(&f.f, lambda_, gamma, &spec(tol)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("c1", r.c1)?;
    d.set_item("c2", r.c2)?;
    d.set_item("gamma", r.gamma)?;
    d.set_item("logdet_prediction", r.logdet_prediction)?;
    Ok(d)
}

/// Fredholm log-determinants over gammas with the fitted c1, c2.
#[pyfunction]
#[pyo3(signature = (f, lambda_, gammas, tol = None))]
fn bw_scan<'py>(py: Python<'py>, f: &PyTestFunction, lambda_: f64, gammas: Vec<f64>, tol: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = bwasym::bw_scan(&f.f, lambda_, &gammas, &spec(tol)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("c1", s.c1)?;
    d.set_item("c2", s.c2)?;
    d.set_item("c1_fit", s.c1_fit)?;
    d.set_item("c2_fit", s.c2_fit)?;
    let rows: Vec<(f64, f64, f64, f64)> = s.rows.iter().map(|r| (r.gamma, r.logdet, r.predicted, r.residual)).collect();
    d.set_item("rows", rows)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (f, n, tol = None))]
fn shift_mean(f: &PyTestFunction, n: usize, tol: Option<f64>) -> PyResult<f64> {
    bwasym::shift_mean(&f.f, n, &spec(tol)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (f, tol = None))]
fn shift_variance(f: &PyTestFunction, tol: Option<f64>) -> PyResult<f64> {
    bwasym::shift_variance(&f.f, &spec(tol)?).map_err(to_py)
}

#[pymodule]
fn pysoftedge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", softedge::VERSION)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyTestFunction>()?;
    m.add_function(wrap_pyfunction!(airy_ai, m)?)?;
    m.add_function(wrap_pyfunction!(airy_ai_prime, m)?)?;
    m.add_function(wrap_pyfunction!(airy_primitive, m)?)?;
    m.add_function(wrap_pyfunction!(b_function, m)?)?;
    m.add_function(wrap_pyfunction!(airy_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(l_function, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_edge_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(moment_formulas, m)?)?;
    m.add_function(wrap_pyfunction!(mean_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(variance_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(airy_moments, m)?)?;
    m.add_function(wrap_pyfunction!(finite_n_moments, m)?)?;
    m.add_function(wrap_pyfunction!(mgf_finite_n, m)?)?;
    m.add_function(wrap_pyfunction!(sample_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(sample_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_moments, m)?)?;
    m.add_function(wrap_pyfunction!(basor_widom, m)?)?;
    m.add_function(wrap_pyfunction!(bw_scan, m)?)?;
    m.add_function(wrap_pyfunction!(shift_mean, m)?)?;
    m.add_function(wrap_pyfunction!(shift_variance, m)?)?;
    Ok(())
}
