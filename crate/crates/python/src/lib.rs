//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers (row-major), so `numpy.asarray` works in both directions.

use atomcov::hermlin::{fb_average, neg_log_likelihood_samples, scm};
use atomcov::simkit::{self, LineSpectrumModel, MseConfig, SinrConfig};
use atomcov::{CMatrix, HermMat, Seed, SnapshotSet};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<Complex64>>;

fn err(e: atomcov::Error) -> PyErr {
    match e {
        atomcov::Error::Diverged(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Row-major nested lists to a dense matrix.
pub fn rows_to_matrix(rows: &[Vec<Complex64>]) -> atomcov::Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(atomcov::Error::Dimension("matrix must be non-empty".into()));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(atomcov::Error::Dimension("all rows must have the same length".into()));
    }
    Ok(CMatrix::from_fn(r, c, |i, k| rows[i][k]))
}

pub fn matrix_to_rows(a: &CMatrix) -> Rows {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|k| a[(i, k)]).collect()).collect()
}

fn herm(rows: &[Vec<Complex64>]) -> PyResult<HermMat> {
    HermMat::new(rows_to_matrix(rows).map_err(err)?).map_err(err)
}

fn snapshots(rows: &[Vec<Complex64>]) -> PyResult<SnapshotSet> {
    SnapshotSet::new(rows_to_matrix(rows).map_err(err)?, Seed::External).map_err(err)
}

/// Covariance structure: Toeplitz, banded Toeplitz, block-Toeplitz or
/// Toeplitz-block-Toeplitz.
#[pyclass(name = "StructureSpec", module = "atomcov_py", frozen, from_py_object)]
#[derive(Clone)]
struct PySpec(atomcov::StructureSpec);

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn toeplitz(m: usize) -> PyResult<Self> {
        atomcov::StructureSpec::toeplitz(m).map(Self).map_err(err)
    }

    #[staticmethod]
    fn banded(m: usize, b: usize) -> PyResult<Self> {
        atomcov::StructureSpec::banded(m, b).map(Self).map_err(err)
    }

    #[staticmethod]
    fn block_toeplitz(p: usize, l: usize) -> PyResult<Self> {
        atomcov::StructureSpec::block_toeplitz(p, l).map(Self).map_err(err)
    }

    #[staticmethod]
    fn tbt(p: usize, l: usize) -> PyResult<Self> {
        atomcov::StructureSpec::tbt(p, l).map(Self).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind_name()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    /// Number of real parameters.
    #[getter]
    fn theta_len(&self) -> usize {
        self.0.theta_len()
    }

    /// Orthogonal projection of a Hermitian matrix onto the set.
    fn project(&self, matrix: Rows) -> PyResult<Rows> {
        let p = self.0.project(&herm(&matrix)?).map_err(err)?;
        Ok(matrix_to_rows(p.matrix()))
    }

    fn __repr__(&self) -> String {
        format!("StructureSpec({})", serde_json::to_string(&self.0).unwrap_or_default())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

/// Result of an ATOM fit.
#[pyclass(name = "FitReport", module = "atomcov_py", frozen)]
struct PyFitReport(atomcov::FitReport);

#[pymethods]
impl PyFitReport {
    #[getter]
    fn r_hat(&self) -> Rows {
        matrix_to_rows(self.0.r_hat.matrix())
    }

    #[getter]
    fn method(&self) -> String {
        self.0.method.clone()
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.0.objective_trace.clone()
    }

    #[getter]
    fn neg_ll_trace(&self) -> Vec<f64> {
        self.0.neg_ll_trace.clone()
    }

    #[getter]
    fn final_neg_ll(&self) -> f64 {
        self.0.final_neg_ll()
    }

    #[getter]
    fn stationarity_residual(&self) -> f64 {
        self.0.stationarity_residual
    }

    /// `"converged"`, `"max_iterations"` or `"stalled"`.
    #[getter]
    fn exit_reason(&self) -> String {
        serde_json::to_value(self.0.exit_reason).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged()
    }

    #[getter]
    fn outer_iterations(&self) -> usize {
        self.0.outer_iterations
    }

    #[getter]
    fn wall_time_secs(&self) -> f64 {
        self.0.wall_time_secs
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "FitReport(method={:?}, exit_reason={:?}, outer_iterations={}, neg_ll={})",
            self.0.method,
            self.exit_reason(),
            self.0.outer_iterations,
            self.0.final_neg_ll()
        )
    }
}

fn resolve_spec(spec: Option<PySpec>, m: usize) -> PyResult<atomcov::StructureSpec> {
    let s = match spec {
        Some(s) => s.0,
        None => atomcov::StructureSpec::toeplitz(m).map_err(err)?,
    };
    s.check_dim(m).map_err(err)?;
    Ok(s)
}

/// Toeplitz ML fit by MM with an ADMM inner solver. `samples` is `m x n`.
#[pyfunction]
#[pyo3(signature = (samples, outer_tol=1e-4, max_outer=1000, rho=1.0, seed=0))]
fn atom1(py: Python<'_>, samples: Rows, outer_tol: f64, max_outer: usize, rho: f64, seed: u64) -> PyResult<PyFitReport> {
    let s = snapshots(&samples)?;
    let opts = atomcov::Atom1Options { outer_tol, max_outer, rho, seed, ..Default::default() };
    py.detach(|| {
        let spec = atomcov::StructureSpec::toeplitz(s.dim())?;
        atomcov::atom1(&atomcov::data_factor(&s, &spec)?, &opts)
    })
    .map(PyFitReport)
    .map_err(err)
}

/// Structured ML fit by MM with a Dykstra inner solver; Toeplitz by default.
#[pyfunction]
#[pyo3(signature = (samples, spec=None, gamma0=1e-4, outer_tol=1e-4, max_outer=1000))]
fn atom2(py: Python<'_>, samples: Rows, spec: Option<PySpec>, gamma0: f64, outer_tol: f64, max_outer: usize) -> PyResult<PyFitReport> {
    let s = snapshots(&samples)?;
    let spec = resolve_spec(spec, s.dim())?;
    let opts = atomcov::Atom2Options { gamma0, outer_tol, max_outer, ..atomcov::Atom2Options::with_spec(spec) };
    py.detach(|| atomcov::atom2(&atomcov::data_factor(&s, &spec)?, &opts)).map(PyFitReport).map_err(err)
}

/// Sample covariance `X Xᴴ / n`.
#[pyfunction]
fn sample_covariance(samples: Rows) -> PyResult<Rows> {
    Ok(matrix_to_rows(scm(&snapshots(&samples)?).map_err(err)?.matrix()))
}

/// Forward-backward averaged sample covariance.
#[pyfunction]
fn fb_covariance(samples: Rows) -> PyResult<Rows> {
    Ok(matrix_to_rows(fb_average(&scm(&snapshots(&samples)?).map_err(err)?).matrix()))
}

/// `Tr(S R⁻¹) + ln det R` with `S` the sample covariance.
#[pyfunction]
fn neg_log_likelihood(cov: Rows, samples: Rows) -> PyResult<f64> {
    neg_log_likelihood_samples(&herm(&cov)?, &snapshots(&samples)?).map_err(err)
}

/// Line-spectrum covariance `Σ p a(ω) a(ω)ᴴ + σ² I`.
#[pyfunction]
#[pyo3(signature = (m, frequencies, powers, noise_floor=0.0))]
fn line_spectrum_cov(m: usize, frequencies: Vec<f64>, powers: Vec<f64>, noise_floor: f64) -> PyResult<Rows> {
    let model = LineSpectrumModel { m, frequencies, powers, noise_floor };
    Ok(matrix_to_rows(simkit::cov_line_spectrum(&model).map_err(err)?.matrix()))
}

/// `n` zero-mean circular Gaussian snapshots with covariance `cov`, as an
/// `m x n` matrix.
#[pyfunction]
fn sample_snapshots(cov: Rows, n: usize, seed: u64) -> PyResult<Rows> {
    Ok(matrix_to_rows(simkit::sample_snapshots(&herm(&cov)?, n, seed).map_err(err)?.data()))
}

/// Trace of the Cramér-Rao bound on the structure parameters.
#[pyfunction]
#[pyo3(signature = (cov, n, spec=None))]
fn crb(cov: Rows, n: usize, spec: Option<PySpec>) -> PyResult<f64> {
    let r = herm(&cov)?;
    let spec = resolve_spec(spec, r.dim())?;
    atomcov::crb_report(&r, &spec, n).map(|c| c.crb).map_err(err)
}

/// Runs an MSE benchmark from a JSON config and returns the result as JSON.
#[pyfunction]
fn mse_benchmark(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg: MseConfig = serde_json::from_str(config_json).map_err(json_err)?;
    let (res, _) = py.detach(|| simkit::mse_benchmark(&cfg)).map_err(err)?;
    serde_json::to_string(&res).map_err(json_err)
}

/// Runs a beamforming SINR experiment from a JSON config and returns the
/// table as JSON.
#[pyfunction]
fn sinr_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg: SinrConfig = serde_json::from_str(config_json).map_err(json_err)?;
    let table = py.detach(|| simkit::sinr_experiment(&cfg)).map_err(err)?;
    serde_json::to_string(&table).map_err(json_err)
}

#[pymodule]
fn atomcov_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyFitReport>()?;
    m.add_function(wrap_pyfunction!(atom1, m)?)?;
    m.add_function(wrap_pyfunction!(atom2, m)?)?;
    m.add_function(wrap_pyfunction!(sample_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(fb_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(neg_log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(line_spectrum_cov, m)?)?;
    m.add_function(wrap_pyfunction!(sample_snapshots, m)?)?;
    m.add_function(wrap_pyfunction!(crb, m)?)?;
    m.add_function(wrap_pyfunction!(mse_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(sinr_experiment, m)?)?;
    Ok(())
}
