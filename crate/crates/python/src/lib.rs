//! Python bindings: the `qnoise` extension module.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qnoise::capacity::{self, CapacityCurve, ScalarChannelParams, VectorChannelParams};
use qnoise::em::{self, EmConfig, FitReport};
use qnoise::noise_model::{self, Dataset, HybridNoiseSpec, Skeleton, TruncatedMixture, TruncationRule};
use qnoise::numkit::{self, SquareMatrix};

fn to_py(e: qnoise::Error) -> PyErr {
    use qnoise::Error as E;
    match e {
        E::Io { .. } => PyOSError::new_err(e.to_string()),
        E::NonConvergence { .. }
        | E::DegeneratePoint { .. }
        | E::EmptyCluster { .. }
        | E::AtIteration { .. }
        | E::NotPositiveDefinite { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for qnoise::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn rule(name: &str) -> PyResult<TruncationRule> {
    match name {
        "centered" => Ok(TruncationRule::CenteredWindow),
        "greedy" => Ok(TruncationRule::GreedyMass),
        other => Err(PyValueError::new_err(format!("unknown rule {other:?}; expected 'centered' or 'greedy'"))),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<SquareMatrix> {
    SquareMatrix::from_rows(&rows).py()
}

#[pyfunction]
fn poisson_pmf(lam: f64, k: u64) -> PyResult<f64> {
    numkit::poisson_pmf(lam, k).py()
}

#[pyfunction]
fn log_sum_exp(values: Vec<f64>) -> PyResult<f64> {
    numkit::log_sum_exp(&values).py()
}

#[pyfunction]
fn mvn_logpdf(z: Vec<f64>, mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> PyResult<f64> {
    numkit::mvn_logpdf(&z, &mu, &matrix(sigma)?).py()
}

/// Retained Poisson terms, most probable first.
#[pyclass(name = "Skeleton", module = "qnoise", frozen, from_py_object)]
#[derive(Clone)]
struct PySkeleton(Skeleton);

#[pymethods]
impl PySkeleton {
    /// Builds a skeleton from explicit `(k, weight)` pairs.
    #[new]
    fn new(lam: f64, pairs: Vec<(u64, f64)>) -> PyResult<Self> {
        Skeleton::from_weights(lam, &pairs).py().map(Self)
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn coverage(&self) -> f64 {
        self.0.coverage
    }

    #[getter]
    fn entries(&self) -> Vec<(u64, f64)> {
        self.0.entries.iter().map(|e| (e.k, e.weight)).collect()
    }

    fn indices(&self) -> Vec<u64> {
        self.0.indices()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Skeleton(lam={}, K={}, coverage={:.6})", self.0.lambda, self.0.len(), self.0.coverage)
    }
}

#[pyfunction]
#[pyo3(signature = (lam, tol = noise_model::DEFAULT_TOL, rule = "centered"))]
fn truncate(lam: f64, tol: f64, rule: &str) -> PyResult<PySkeleton> {
    noise_model::truncate_with(lam, tol, self::rule(rule)?).py().map(PySkeleton)
}

#[pyfunction]
fn top_k(lam: f64, count: usize) -> PyResult<PySkeleton> {
    noise_model::top_k(lam, count).py().map(PySkeleton)
}

#[pyclass(name = "HybridNoiseSpec", module = "qnoise", frozen, from_py_object)]
#[derive(Clone)]
struct PySpec(HybridNoiseSpec);

#[pymethods]
impl PySpec {
    #[new]
    #[pyo3(signature = (lam, mu_z2 = 0.0, sigma2_z2 = 1.0, dim = 2))]
    fn new(lam: f64, mu_z2: f64, sigma2_z2: f64, dim: usize) -> PyResult<Self> {
        HybridNoiseSpec::new(lam, mu_z2, sigma2_z2, dim).py().map(Self)
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn mu_z2(&self) -> f64 {
        self.0.mu_z2
    }

    #[getter]
    fn sigma2_z2(&self) -> f64 {
        self.0.sigma2_z2
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn __repr__(&self) -> String {
        let s = &self.0;
        format!("HybridNoiseSpec(lam={}, mu_z2={}, sigma2_z2={}, dim={})", s.lambda, s.mu_z2, s.sigma2_z2, s.dim)
    }
}

/// A Gaussian mixture with shift-indexed components.
#[pyclass(name = "Mixture", module = "qnoise", frozen, from_py_object)]
#[derive(Clone)]
struct PyMixture(TruncatedMixture);

#[pymethods]
impl PyMixture {
    /// `components` is a list of `(k, weight, mean, cov)` tuples.
    #[new]
    fn new(lam: f64, components: Vec<(u64, f64, Vec<f64>, Vec<Vec<f64>>)>) -> PyResult<Self> {
        let components = components
            .into_iter()
            .map(|(k, weight, mean, cov)| Ok(noise_model::Component { k, weight, mean, cov: matrix(cov)? }))
            .collect::<PyResult<Vec<_>>>()?;
        TruncatedMixture::new(lam, components).py().map(Self)
    }

    #[staticmethod]
    fn build(spec: &PySpec, skeleton: &PySkeleton) -> PyResult<Self> {
        noise_model::build_mixture(&spec.0, &skeleton.0).py().map(Self)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(Self).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        noise_model::load_mixture(path).py().map(Self)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        noise_model::save_mixture(path, &self.0).py()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn coverage(&self) -> f64 {
        self.0.coverage()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights()
    }

    #[getter]
    fn shift_indices(&self) -> Vec<u64> {
        self.0.shift_indices()
    }

    #[getter]
    fn means(&self) -> Vec<Vec<f64>> {
        self.0.components().iter().map(|c| c.mean.clone()).collect()
    }

    #[getter]
    fn covs(&self) -> Vec<Vec<Vec<f64>>> {
        self.0.components().iter().map(|c| c.cov.rows()).collect()
    }

    fn logpdf(&self, z: Vec<f64>) -> PyResult<f64> {
        noise_model::mixture_logpdf(&self.0, &z).py()
    }

    /// Draws `n` rows with the weights renormalised.
    fn sample(&self, n: usize, seed: u64) -> PyResult<PyDataset> {
        noise_model::sample_mixture(&self.0, n, seed).py().map(PyDataset)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Mixture(lam={}, K={}, dim={})", self.0.lambda(), self.0.len(), self.0.dim())
    }
}

#[pyclass(name = "Dataset", module = "qnoise", frozen, from_py_object)]
#[derive(Clone)]
struct PyDataset(Dataset);

#[pymethods]
impl PyDataset {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Dataset::from_rows(&rows, None).py().map(Self)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        noise_model::load_dataset(path).py().map(Self)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        noise_model::save_dataset(path, &self.0).py()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn seed(&self) -> Option<u64> {
        self.0.meta().map(|m| m.seed)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, dim={})", self.0.len(), self.0.dim())
    }
}

#[pyfunction]
fn sample(spec: &PySpec, skeleton: &PySkeleton, n: usize, seed: u64) -> PyResult<PyDataset> {
    noise_model::sample(&spec.0, &skeleton.0, n, seed).py().map(PyDataset)
}

#[pyfunction]
fn e_step(mixture: &PyMixture, data: &PyDataset) -> PyResult<Vec<Vec<f64>>> {
    let gamma = em::e_step(&mixture.0, &data.0).py()?;
    Ok((0..gamma.n_rows()).map(|i| gamma.row(i).to_vec()).collect())
}

#[pyfunction]
fn log_likelihood(mixture: &PyMixture, data: &PyDataset) -> PyResult<f64> {
    em::log_likelihood(&mixture.0, &data.0).py()
}

#[pyclass(name = "FitReport", module = "qnoise", frozen)]
struct PyFitReport(FitReport);

#[pymethods]
impl PyFitReport {
    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn iterations_run(&self) -> usize {
        self.0.iterations_run
    }

    #[getter]
    fn log_likelihoods(&self) -> Vec<f64> {
        self.0.log_likelihoods()
    }

    #[getter]
    fn effective_counts(&self) -> Vec<Vec<f64>> {
        self.0.iterations.iter().map(|r| r.effective_counts.clone()).collect()
    }

    #[getter]
    fn lambda_hat(&self) -> Option<f64> {
        self.0.lambda_hat.map(|l| l.from_zero_weight)
    }

    #[getter]
    fn lambda_hat_moment(&self) -> Option<f64> {
        self.0.lambda_hat.map(|l| l.moment)
    }

    #[pyo3(signature = (iteration = None))]
    fn mixture(&self, iteration: Option<usize>) -> PyResult<PyMixture> {
        match iteration {
            None => Ok(PyMixture(self.0.final_mixture().clone())),
            Some(i) => self
                .0
                .iterations
                .get(i)
                .map(|r| PyMixture(r.mixture.clone()))
                .ok_or_else(|| PyValueError::new_err(format!("no iteration {i}"))),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        em::save_fit_report(path, &self.0).py()
    }

    fn __repr__(&self) -> String {
        format!("FitReport(converged={}, iterations_run={})", self.0.converged, self.0.iterations_run)
    }
}

#[pyfunction]
#[pyo3(signature = (data, init, max_iters = 200, ll_rel_tol = 1e-8, cov_floor = 1e-6))]
fn fit(py: Python<'_>, data: &PyDataset, init: &PyMixture, max_iters: usize, ll_rel_tol: f64, cov_floor: f64) -> PyResult<PyFitReport> {
    let cfg = EmConfig { max_iters, ll_rel_tol, cov_floor, snapshot_every: 0 };
    let (data, init) = (&data.0, &init.0);
    py.detach(|| em::fit(data, init, &cfg)).py().map(PyFitReport)
}

/// `(-ln w0, moment estimate)` from the mixture weights.
#[pyfunction]
fn estimate_lambda(mixture: &PyMixture) -> PyResult<(f64, f64)> {
    em::estimate_lambda(&mixture.0).py().map(|l| (l.from_zero_weight, l.moment))
}

#[pyclass(name = "CapacityCurve", module = "qnoise", frozen)]
struct PyCurve(CapacityCurve);

#[pymethods]
impl PyCurve {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        capacity::load_curve(path).py().map(Self)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        capacity::save_curve(path, &self.0).py()
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid()
    }

    #[getter]
    fn capacities(&self) -> Vec<f64> {
        self.0.capacities()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.0.fingerprint.clone()
    }

    fn __len__(&self) -> usize {
        self.0.points.len()
    }
}

fn scalar_params(skeleton: &PySkeleton, sigma2_x: f64, sigma2_z2: f64, renormalize: bool) -> PyResult<ScalarChannelParams> {
    let mut p = ScalarChannelParams::new(skeleton.0.clone(), sigma2_x, sigma2_z2).py()?;
    p.renormalize = renormalize;
    Ok(p)
}

#[pyfunction]
#[pyo3(signature = (skeleton, sigma2_x, sigma2_z2, renormalize = false))]
fn capacity_scalar(skeleton: &PySkeleton, sigma2_x: f64, sigma2_z2: f64, renormalize: bool) -> PyResult<f64> {
    capacity::capacity_scalar(&scalar_params(skeleton, sigma2_x, sigma2_z2, renormalize)?).py()
}

#[pyfunction]
fn capacity_vector(mixture: &PyMixture, sigma_y_covs: Vec<Vec<Vec<f64>>>) -> PyResult<f64> {
    let covs = sigma_y_covs.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
    capacity::capacity_vector(&VectorChannelParams::new(mixture.0.clone(), covs).py()?).py()
}

/// Capacity at each SNR (dB) with `sigma2_z2` fixed. `snr_db` is a list of
/// grid points or a `"min:max:step"` string.
#[pyfunction]
#[pyo3(signature = (skeleton, sigma2_z2, snr_db, renormalize = false))]
fn sweep(skeleton: &PySkeleton, sigma2_z2: f64, snr_db: &Bound<'_, PyAny>, renormalize: bool) -> PyResult<PyCurve> {
    let grid = match snr_db.extract::<String>() {
        Ok(spec) => capacity::parse_grid(&spec).py()?,
        Err(_) => snr_db.extract::<Vec<f64>>()?,
    };
    capacity::sweep(&scalar_params(skeleton, 1.0, sigma2_z2, renormalize)?, &grid).py().map(PyCurve)
}

/// Pointwise comparison; returns the report as a JSON string.
#[pyfunction]
fn compare(a: &PyCurve, b: &PyCurve) -> PyResult<String> {
    let report = capacity::compare(&a.0, &b.0).py()?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "qnoise")]
fn qnoise_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(poisson_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(log_sum_exp, m)?)?;
    m.add_function(wrap_pyfunction!(mvn_logpdf, m)?)?;
    m.add_function(wrap_pyfunction!(truncate, m)?)?;
    m.add_function(wrap_pyfunction!(top_k, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(e_step, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_scalar, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_vector, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_class::<PySkeleton>()?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyMixture>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFitReport>()?;
    m.add_class::<PyCurve>()?;
    Ok(())
}
