//! Python bindings: `import qdiscord`.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qdiscord_core::discord::{self as core_discord, MeasureKind};
use qdiscord_core::monogamy::{self, InequalityCheck};
use qdiscord_core::partition::{self as core_partition, MoveSet};
use qdiscord_core::qstate::{self, load_state, make_named_state, sample_random_state, save_state};
use qdiscord_core::{linalg, Error, OptimizerConfig, Partition};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Consistency(msg) => PyRuntimeError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn kind(text: &str) -> PyResult<MeasureKind> {
    text.parse().map_err(to_py)
}

fn partition(text: &str, rho: Option<&qdiscord_core::DensityMatrix>) -> PyResult<Partition> {
    match rho {
        Some(r) => Partition::parse_with(text, &r.names()).map_err(to_py),
        None => Partition::parse(text).map_err(to_py),
    }
}

fn config(restarts: usize, grid: usize, seed: u64) -> PyResult<OptimizerConfig> {
    let cfg = OptimizerConfig {
        restarts,
        grid_points_per_angle: grid,
        seed,
        ..Default::default()
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

#[pyclass(name = "DensityMatrix", module = "qdiscord", frozen)]
struct PyDensityMatrix {
    inner: qdiscord_core::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// Builds from a row-major list of rows of complex numbers.
    #[new]
    fn new(dims: Vec<usize>, rows: Vec<Vec<linalg::C64>>) -> PyResult<Self> {
        let d: usize = dims.iter().product();
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err(format!("expected a {d}x{d} matrix")));
        }
        let m = linalg::CMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Ok(Self {
            inner: qdiscord_core::DensityMatrix::from_dims(&dims, m).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (name, params = Vec::new()))]
    fn named(name: &str, params: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: make_named_state(name, &params).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn random(dims: Vec<usize>, rank: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: sample_random_state(&dims, rank, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_state(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_state(path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().into_iter().map(String::from).collect()
    }

    /// von Neumann entropy in bits.
    fn entropy(&self) -> f64 {
        self.inner.entropy()
    }

    fn partial_trace(&self, keep: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.partial_trace(&keep).map_err(to_py)?,
        })
    }

    fn mutual_information(&self, partition_text: &str) -> PyResult<f64> {
        let p = partition(partition_text, Some(&self.inner))?;
        qstate::mutual_information(&self.inner, &p).map_err(to_py)
    }

    fn to_lists(&self) -> Vec<Vec<(f64, f64)>> {
        let m = self.inner.matrix();
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dims={:?})", self.inner.dims())
    }
}

#[pyclass(name = "DiscordResult", module = "qdiscord", frozen, get_all)]
struct PyDiscordResult {
    kind: String,
    label: String,
    value: f64,
    blocks: Vec<Vec<usize>>,
    params: Vec<f64>,
    certified: bool,
    spread: f64,
    evaluations: usize,
}

#[pymethods]
impl PyDiscordResult {
    fn __repr__(&self) -> String {
        format!("DiscordResult({} = {:.6})", self.label, self.value)
    }
}

fn check_dict<'py>(py: Python<'py>, c: &InequalityCheck) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &c.name)?;
    d.set_item("statement", &c.statement)?;
    d.set_item("lhs", c.lhs)?;
    d.set_item("rhs", c.rhs)?;
    d.set_item("margin", c.margin)?;
    d.set_item("lhs_certified", c.lhs_certified)?;
    d.set_item("verdict", c.verdict.as_str())?;
    let assumptions: Vec<(String, f64, f64, bool)> =
        c.assumptions.iter().map(|a| (a.statement.clone(), a.lhs, a.rhs, a.satisfied)).collect();
    d.set_item("assumptions", assumptions)?;
    Ok(d)
}

/// Discord of `rho` for `kind` in {"qd", "mqd", "gqd"} over a partition such as "A|B|C".
#[pyfunction]
#[pyo3(signature = (rho, kind_text, partition_text, restarts = 24, grid = 13, seed = 0))]
fn discord(
    py: Python<'_>,
    rho: &PyDensityMatrix,
    kind_text: &str,
    partition_text: &str,
    restarts: usize,
    grid: usize,
    seed: u64,
) -> PyResult<PyDiscordResult> {
    let k = kind(kind_text)?;
    let p = partition(partition_text, Some(&rho.inner))?;
    let cfg = config(restarts, grid, seed)?;
    let r = py
        .detach(|| core_discord::discord(&rho.inner, k, &p, &cfg))
        .map_err(to_py)?;
    Ok(PyDiscordResult {
        kind: r.kind.as_str().to_string(),
        label: r.label,
        value: r.value,
        blocks: r.blocks,
        params: r.opt.params,
        certified: r.opt.certified,
        spread: r.opt.spread,
        evaluations: r.opt.evaluations,
    })
}

#[pyfunction]
#[pyo3(signature = (rho, prop_id, restarts = 24, grid = 13, seed = 0))]
fn check_proposition<'py>(
    py: Python<'py>,
    rho: &PyDensityMatrix,
    prop_id: &str,
    restarts: usize,
    grid: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config(restarts, grid, seed)?;
    let checks = py
        .detach(|| monogamy::check_proposition(&rho.inner, prop_id, &cfg))
        .map_err(to_py)?;
    checks.iter().map(|c| check_dict(py, c)).collect()
}

/// The dis-correlated condition for a finer/coarser pair; returns a dict with
/// `equality`, `dis_correlated` and the Xi members with their values.
#[pyfunction]
#[pyo3(signature = (rho, kind_text, finer, coarser, restarts = 24, grid = 13, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn check_discorrelated<'py>(
    py: Python<'py>,
    rho: &PyDensityMatrix,
    kind_text: &str,
    finer: &str,
    coarser: &str,
    restarts: usize,
    grid: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let k = kind(kind_text)?;
    let p = partition(finer, Some(&rho.inner))?;
    let q = partition(coarser, Some(&rho.inner))?;
    let cfg = config(restarts, grid, seed)?;
    let r = py
        .detach(|| monogamy::check_discorrelated(&rho.inner, k, &p, &q, &cfg))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("equality", r.equality)?;
    d.set_item("dis_correlated", r.dis_correlated)?;
    d.set_item("chain", r.chain.clone())?;
    let xi: Vec<(String, f64, bool)> = r.xi.iter().map(|x| (x.partition.to_string(), x.value, x.vanishes)).collect();
    d.set_item("xi", xi)?;
    Ok(d)
}

/// Xi(finer - coarser) under all coarsening moves ("mqd") or discard/merge only ("gqd").
#[pyfunction]
#[pyo3(signature = (finer, coarser, kind_text = "mqd"))]
fn xi_set(finer: &str, coarser: &str, kind_text: &str) -> PyResult<Vec<String>> {
    let allowed = match kind(kind_text)? {
        MeasureKind::Gqd => MoveSet::DISCARD | MoveSet::MERGE,
        _ => MoveSet::ALL,
    };
    let p = partition(finer, None)?;
    let q = partition(coarser, None)?;
    Ok(core_partition::xi_set_with(&p, &q, allowed)
        .map_err(to_py)?
        .iter()
        .map(|x| x.to_string())
        .collect())
}

#[pyfunction]
#[pyo3(signature = (finer, coarser, kind_text = "mqd"))]
fn is_coarser(finer: &str, coarser: &str, kind_text: &str) -> PyResult<bool> {
    let allowed = match kind(kind_text)? {
        MeasureKind::Gqd => MoveSet::DISCARD | MoveSet::MERGE,
        _ => MoveSet::ALL,
    };
    Ok(core_partition::is_coarser(&partition(finer, None)?, &partition(coarser, None)?, allowed).is_some())
}

/// `(alpha, equality)` or `None` when no exponent in range works.
#[pyfunction]
fn monogamy_alpha(lhs: f64, rhs: Vec<f64>) -> PyResult<Option<(f64, bool)>> {
    Ok(monogamy::monogamy_alpha(lhs, &rhs).map_err(to_py)?.map(|a| (a.alpha, a.equality)))
}

#[pymodule]
fn qdiscord(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyDiscordResult>()?;
    m.add_function(wrap_pyfunction!(discord, m)?)?;
    m.add_function(wrap_pyfunction!(check_proposition, m)?)?;
    m.add_function(wrap_pyfunction!(check_discorrelated, m)?)?;
    m.add_function(wrap_pyfunction!(xi_set, m)?)?;
    m.add_function(wrap_pyfunction!(is_coarser, m)?)?;
    m.add_function(wrap_pyfunction!(monogamy_alpha, m)?)?;
    Ok(())
}
