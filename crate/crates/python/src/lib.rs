//! Python bindings. Structured inputs (ensembles, families, experiments) are
//! passed as JSON strings in the same schema the command-line tool reads;
//! structured outputs come back as JSON strings as well.

use ndarray::Array2;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use subclt::ensembles::{Beta, EnsembleSpec};
use subclt::gff::{self, GridPoint, SheetGrid};
use subclt::indexing::GoodFamily as CoreFamily;
use subclt::matrixops::{self, SubmatrixData};
use subclt::montecarlo::{self, Densities, ExperimentSpec, SequenceDecl};
use subclt::theory::{self, CovarianceParams};

create_exception!(subclt_py, SubcltError, PyException);

fn err(e: subclt::Error) -> PyErr {
    SubcltError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    SubcltError::new_err(e.to_string())
}

fn beta_of(beta: u8) -> PyResult<Beta> {
    Beta::try_from(beta).map_err(SubcltError::new_err)
}

fn rows<T: Copy>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// A Wigner ensemble.
#[pyclass(name = "Ensemble", frozen)]
struct Ensemble {
    spec: EnsembleSpec,
}

#[pymethods]
impl Ensemble {
    #[staticmethod]
    fn goe() -> Self {
        Self { spec: EnsembleSpec::goe() }
    }

    #[staticmethod]
    fn gue() -> Self {
        Self { spec: EnsembleSpec::gue() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: EnsembleSpec = serde_json::from_str(text).map_err(json_err)?;
        Ok(Self { spec })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.spec).map_err(json_err)
    }

    #[getter]
    fn beta(&self) -> u8 {
        self.spec.beta.into()
    }

    /// Violated moment constraints, one message each; empty when valid.
    fn violations(&self) -> Vec<String> {
        self.spec.validate().violations.iter().map(|v| v.to_string()).collect()
    }

    /// The submatrix on `indices` (1-based) as nested lists.
    fn realize(&self, py: Python<'_>, seed: u64, replicate: u64, indices: Vec<u64>) -> PyResult<Py<PyAny>> {
        let m = matrixops::realize(&self.spec, seed, replicate, &indices).map_err(err)?;
        Ok(match &m.data {
            SubmatrixData::Real(a) => rows(a).into_pyobject(py)?.into_any().unbind(),
            SubmatrixData::Complex(a) => rows(a).into_pyobject(py)?.into_any().unbind(),
        })
    }

    /// `[Tr X^1, ..., Tr X^max_power]` for the submatrix on `indices`.
    fn power_traces(&self, seed: u64, replicate: u64, indices: Vec<u64>, max_power: u32) -> PyResult<Vec<f64>> {
        let m = matrixops::realize(&self.spec, seed, replicate, &indices).map_err(err)?;
        m.power_traces(max_power).map_err(err)
    }

    /// `[Tr T_0(X/scale), ..., Tr T_max_degree(X/scale)]`.
    fn chebyshev_traces(&self, seed: u64, replicate: u64, indices: Vec<u64>, max_degree: u32, scale: f64) -> PyResult<Vec<f64>> {
        let m = matrixops::realize(&self.spec, seed, replicate, &indices).map_err(err)?;
        m.chebyshev_traces(max_degree, scale).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Ensemble({})", serde_json::to_string(&self.spec).unwrap_or_default())
    }
}

/// A labelled family of index sequences at scale `L`.
#[pyclass(name = "GoodFamily", frozen)]
struct GoodFamily {
    inner: CoreFamily,
}

#[pymethods]
impl GoodFamily {
    #[staticmethod]
    fn four_sequence_example(scale: u64) -> Self {
        Self { inner: CoreFamily::four_sequence_example(scale) }
    }

    /// `text` is a JSON list of `{"label": ..., "sequence": {"kind": ...}}`.
    #[staticmethod]
    fn from_json(scale: u64, text: &str) -> PyResult<Self> {
        let decls: Vec<SequenceDecl> = serde_json::from_str(text).map_err(json_err)?;
        let members = decls.into_iter().map(|d| (d.label, d.sequence)).collect();
        Ok(Self { inner: CoreFamily::new(scale, members).map_err(err)? })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn scale(&self) -> u64 {
        self.inner.scale()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// First `m` terms of sequence `i`.
    fn prefix(&self, i: usize, m: u64) -> PyResult<Vec<u64>> {
        self.check(i)?;
        Ok(self.inner.sequence(i).prefix(m))
    }

    fn alpha(&self, i: usize, x: f64, j: usize, y: f64) -> PyResult<f64> {
        self.inner.alpha_limit(i, x, j, y).map_err(err)
    }

    fn kernel(&self, i: usize, z: Complex64, j: usize, w: Complex64) -> PyResult<f64> {
        theory::gff_kernel(&self.inner, i, z, j, w).map_err(err)
    }
}

impl GoodFamily {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.inner.len() {
            return Err(SubcltError::new_err(format!("sheet {i} out of range")));
        }
        Ok(())
    }
}

/// Kernel matrix of the correlated field on a grid of `(sheet, z)` points.
#[pyclass(name = "FieldCovariance")]
struct FieldCovariance {
    inner: gff::FieldCovariance,
}

#[pymethods]
impl FieldCovariance {
    #[new]
    #[pyo3(signature = (family, points, diagonal_radius = gff::DEFAULT_DIAGONAL_RADIUS))]
    fn new(family: &GoodFamily, points: Vec<(usize, Complex64)>, diagonal_radius: f64) -> PyResult<Self> {
        let pts = points.into_iter().map(|(sheet, z)| GridPoint { sheet, z }).collect();
        let grid = SheetGrid::new(family.inner.clone(), pts).map_err(err)?;
        Ok(Self { inner: gff::build_covariance(&grid, diagonal_radius).map_err(err)? })
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.matrix)
    }

    /// Pivoted factorization; returns the report as a JSON string.
    #[pyo3(signature = (tol = gff::DEFAULT_PSD_TOL))]
    fn psd_check(&mut self, tol: f64) -> PyResult<String> {
        let report = self.inner.psd_check(tol).map_err(err)?;
        serde_json::to_string(&report).map_err(json_err)
    }

    /// `n_samples` field draws, one row each. Requires a passed `psd_check`.
    fn sample(&self, n_samples: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.sample_field(n_samples, seed).map_err(err)?))
    }
}

/// Limit covariance of two trace statistics by the named method:
/// `series`, `catalan`, `contour`, `kernel` or `chebyshev`.
#[pyfunction]
#[pyo3(signature = (k_p, k_q, b_p, b_q, c, beta, method = "series", nodes = theory::DEFAULT_NODES))]
#[allow(clippy::too_many_arguments)]
fn limit_covariance(k_p: u32, k_q: u32, b_p: f64, b_q: f64, c: f64, beta: u8, method: &str, nodes: usize) -> PyResult<f64> {
    let p = CovarianceParams::new(k_p, k_q, b_p, b_q, c, beta_of(beta)?);
    let v = match method {
        "series" => theory::limit_covariance_series(&p),
        "catalan" => theory::limit_covariance_catalan(&p),
        "contour" => theory::limit_covariance_contour(&p, None, nodes),
        "kernel" => theory::limit_covariance_kernel_integral(&p, nodes),
        "chebyshev" => theory::chebyshev_limit_covariance(&p),
        other => return Err(SubcltError::new_err(format!("unknown method `{other}`"))),
    };
    v.map_err(err)
}

#[pyfunction]
fn green_function(z: Complex64, w: Complex64) -> PyResult<f64> {
    theory::green_function(z, w).map_err(err)
}

#[pyfunction]
fn omega(x: f64, y: f64) -> PyResult<Complex64> {
    theory::omega(x, y).map_err(err)
}

#[pyfunction]
fn omega_inverse(z: Complex64) -> PyResult<(f64, f64)> {
    theory::omega_inverse(z).map_err(err)
}

fn parse_experiment(text: &str) -> PyResult<ExperimentSpec> {
    serde_json::from_str(text).map_err(json_err)
}

/// Run an experiment and return its summary as JSON.
#[pyfunction]
#[pyo3(signature = (experiment, threads = None))]
fn simulate(py: Python<'_>, experiment: &str, threads: Option<usize>) -> PyResult<String> {
    let spec = parse_experiment(experiment)?;
    let summary = py
        .detach(|| montecarlo::run(&spec, threads).and_then(|raw| montecarlo::summarize(&raw)))
        .map_err(err)?;
    serde_json::to_string(&summary).map_err(json_err)
}

/// Theory rows for every statistic pair, as JSON.
#[pyfunction]
#[pyo3(signature = (experiment, limit = false, nodes = theory::DEFAULT_NODES))]
fn theory_table(experiment: &str, limit: bool, nodes: usize) -> PyResult<String> {
    let resolved = parse_experiment(experiment)?.resolve().map_err(err)?;
    let densities = if limit { Densities::Limit } else { Densities::FiniteScale };
    let rows = montecarlo::theory_table(&resolved, densities, nodes).map_err(err)?;
    serde_json::to_string(&rows).map_err(json_err)
}

/// z-scores of a simulated summary against theory rows (both JSON).
#[pyfunction]
#[pyo3(signature = (summary, theory, threshold = montecarlo::DEFAULT_Z_THRESHOLD))]
fn compare(summary: &str, theory: &str, threshold: f64) -> PyResult<String> {
    let summary = serde_json::from_str(summary).map_err(json_err)?;
    let rows: Vec<montecarlo::TheoryRow> = serde_json::from_str(theory).map_err(json_err)?;
    let cmp = montecarlo::compare(&summary, &rows, threshold).map_err(err)?;
    serde_json::to_string(&cmp).map_err(json_err)
}

#[pymodule]
pub fn subclt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SubcltError", m.py().get_type::<SubcltError>())?;
    m.add_class::<Ensemble>()?;
    m.add_class::<GoodFamily>()?;
    m.add_class::<FieldCovariance>()?;
    m.add_function(wrap_pyfunction!(limit_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(green_function, m)?)?;
    m.add_function(wrap_pyfunction!(omega, m)?)?;
    m.add_function(wrap_pyfunction!(omega_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(theory_table, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
