//! Python bindings: graphs, trees, the splitting oracle, both partial-tree
//! builders, the objective pipelines and the exact checkers.

use std::sync::Arc;

use hcsplit_core::graph::{generate_planted, Profile, Shape};
use hcsplit_core::hctree::{check_strong_consistency, check_weak_consistency};
use hcsplit_core::objectives::{dasgupta_cost, mw_revenue};
use hcsplit_core::oracle::{Adversary, OracleConfig, SplittingOracle};
use hcsplit_core::partial::{build_strong_partial, build_weak_partial};
use hcsplit_core::pipeline::{brute_force_opt, hc_das, hc_mw, Objective};
use hcsplit_core::sparsest::{exact_sparsest_cut, CutConfig};
use hcsplit_core::{io, Error, Graph, HCTree, PartialHCTree, SplitParams};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

create_exception!(hcsplit, BuildFailed, pyo3::exceptions::PyRuntimeError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Fail { reason, trace } => BuildFailed::new_err((reason, trace.to_jsonl())),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Graph", module = "hcsplit", frozen)]
struct PyGraph {
    inner: Arc<Graph>,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(PyGraph {
            inner: Arc::new(Graph::new(n, edges).map_err(to_py)?),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyGraph {
            inner: Arc::new(io::graph_from_json(text).map_err(to_py)?),
        })
    }

    fn to_json(&self) -> String {
        io::graph_to_json(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().iter().map(|e| (e.u, e.v, e.w)).collect()
    }

    fn total_weight(&self) -> f64 {
        self.inner.total_weight()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

#[pyclass(name = "HCTree", module = "hcsplit", frozen)]
struct PyTree {
    inner: Arc<HCTree>,
}

#[pymethods]
impl PyTree {
    /// Parses nested pairs such as `((0,1),2)`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyTree {
            inner: Arc::new(HCTree::parse(text).map_err(to_py)?),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyTree {
            inner: Arc::new(io::tree_from_json(text).map_err(to_py)?),
        })
    }

    fn to_json(&self) -> String {
        io::tree_to_json(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn vertices(&self) -> Vec<usize> {
        self.inner.vertices()
    }

    fn height(&self) -> usize {
        self.inner.height()
    }

    fn splits_away(&self, u: usize, v: usize, w: usize) -> PyResult<usize> {
        self.inner.splits_away(u, v, w).map_err(to_py)
    }

    fn restrict(&self, vertices: Vec<usize>) -> PyResult<PyTree> {
        Ok(PyTree {
            inner: Arc::new(self.inner.restrict(&vertices).map_err(to_py)?),
        })
    }

    fn __eq__(&self, other: &PyTree) -> bool {
        self.inner == other.inner
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("HCTree({})", self.inner)
    }
}

#[pyclass(name = "PartialTree", module = "hcsplit", frozen)]
struct PyPartial {
    inner: PartialHCTree,
}

#[pymethods]
impl PyPartial {
    #[getter]
    fn tau(&self) -> usize {
        self.inner.tau()
    }

    fn super_vertices(&self) -> Vec<Vec<usize>> {
        self.inner.super_vertices().iter().map(|s| s.to_vec()).collect()
    }

    fn is_strongly_consistent(&self, reference: &PyTree) -> bool {
        check_strong_consistency(&self.inner, &reference.inner).is_consistent()
    }

    fn is_weakly_consistent(&self, reference: &PyTree) -> bool {
        check_weak_consistency(&self.inner, &reference.inner).is_consistent()
    }

    fn to_json(&self) -> String {
        io::partial_to_json(&self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

#[pyclass(name = "Oracle", module = "hcsplit", frozen)]
struct PyOracle {
    inner: Arc<SplittingOracle>,
}

#[pymethods]
impl PyOracle {
    #[new]
    #[pyo3(signature = (tree, p = 1.0, adversary = "random_wrong", seed = 0))]
    fn new(tree: &PyTree, p: f64, adversary: &str, seed: u64) -> PyResult<Self> {
        let adversary: Adversary = adversary.parse().map_err(to_py)?;
        let oracle = SplittingOracle::from_arc(tree.inner.clone(), OracleConfig::new(p, adversary, seed));
        Ok(PyOracle {
            inner: Arc::new(oracle.map_err(to_py)?),
        })
    }

    fn query(&self, u: usize, v: usize, w: usize) -> PyResult<usize> {
        self.inner.query(u, v, w).map_err(to_py)
    }

    /// Total queries answered so far.
    fn query_count(&self) -> u64 {
        self.inner.query_count().total
    }
}

#[pyclass(name = "Params", module = "hcsplit", get_all, set_all)]
struct PyParams {
    tau: usize,
    eps: f64,
    sample_strong: usize,
    sample_split: usize,
    sample_orphan: usize,
    exact_counters: bool,
    seed: u64,
    preset: String,
    n: usize,
}

impl PyParams {
    fn resolve(&self) -> PyResult<SplitParams> {
        let mut params = match self.preset.as_str() {
            "paper" => SplitParams::paper(self.n),
            _ => SplitParams::desk(self.n),
        };
        params.tau = self.tau;
        params.eps = self.eps;
        params.sample_strong = self.sample_strong;
        params.sample_split = self.sample_split;
        params.sample_orphan = self.sample_orphan;
        params.exact_counters = self.exact_counters;
        params.seed = self.seed;
        params.validate().map_err(to_py)?;
        Ok(params)
    }
}

#[pymethods]
impl PyParams {
    /// Constants for `n` vertices; `preset` is `desk` or `paper`.
    #[new]
    #[pyo3(signature = (n, preset = "desk", exact_counters = false, seed = 0))]
    fn new(n: usize, preset: &str, exact_counters: bool, seed: u64) -> PyResult<Self> {
        let base = match preset {
            "desk" => SplitParams::desk(n),
            "paper" => SplitParams::paper(n),
            other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
        };
        Ok(PyParams {
            tau: base.tau,
            eps: base.eps,
            sample_strong: base.sample_strong,
            sample_split: base.sample_split,
            sample_orphan: base.sample_orphan,
            exact_counters,
            seed,
            preset: preset.to_string(),
            n,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(n={}, preset={:?}, tau={}, exact_counters={})",
            self.n, self.preset, self.tau, self.exact_counters
        )
    }
}

/// Planted instance: `(graph, tree)`.
#[pyfunction]
#[pyo3(signature = (n, seed = 0, shape = "random"))]
fn planted(n: usize, seed: u64, shape: &str) -> PyResult<(PyGraph, PyTree)> {
    let shape: Shape = shape.parse().map_err(to_py)?;
    let inst = generate_planted(n, seed, &Profile::with_shape(shape)).map_err(to_py)?;
    Ok((
        PyGraph {
            inner: Arc::new(inst.graph),
        },
        PyTree {
            inner: Arc::new(inst.tree),
        },
    ))
}

/// Strong partial tree over the oracle's vertex set, with its trace as JSON
/// lines.
#[pyfunction]
fn build_strong(py: Python<'_>, oracle: &PyOracle, params: &PyParams) -> PyResult<(PyPartial, String)> {
    let params = params.resolve()?;
    let oracle = oracle.inner.clone();
    let (inner, trace) = py
        .detach(move || build_strong_partial(&oracle.truth().vertices(), &oracle, &params))
        .map_err(to_py)?;
    Ok((PyPartial { inner }, trace.to_jsonl()))
}

#[pyfunction]
fn build_weak(py: Python<'_>, oracle: &PyOracle, params: &PyParams) -> PyResult<(PyPartial, String)> {
    let params = params.resolve()?;
    let oracle = oracle.inner.clone();
    let (inner, trace) = py
        .detach(move || build_weak_partial(&oracle.truth().vertices(), &oracle, &params))
        .map_err(to_py)?;
    Ok((PyPartial { inner }, trace.to_jsonl()))
}

/// Full tree for the Dasgupta objective: strong partial tree, then exact
/// sparsest cuts inside super-vertices.
#[pyfunction(name = "hc_das")]
#[pyo3(signature = (graph, oracle, params, exact_limit = 20))]
fn py_hc_das(py: Python<'_>, graph: &PyGraph, oracle: &PyOracle, params: &PyParams, exact_limit: usize) -> PyResult<PyTree> {
    let params = params.resolve()?;
    let (g, oracle) = (graph.inner.clone(), oracle.inner.clone());
    let cuts = CutConfig {
        exact_limit,
        ..CutConfig::default()
    };
    let run = py.detach(move || hc_das(&g, &oracle, &params, &cuts)).map_err(to_py)?;
    Ok(PyTree {
        inner: Arc::new(run.tree),
    })
}

#[pyfunction(name = "hc_mw")]
fn py_hc_mw(py: Python<'_>, graph: &PyGraph, oracle: &PyOracle, params: &PyParams) -> PyResult<PyTree> {
    let params = params.resolve()?;
    let (g, oracle) = (graph.inner.clone(), oracle.inner.clone());
    let run = py.detach(move || hc_mw(&g, &oracle, &params)).map_err(to_py)?;
    Ok(PyTree {
        inner: Arc::new(run.tree),
    })
}

#[pyfunction]
fn cost(graph: &PyGraph, tree: &PyTree) -> PyResult<f64> {
    Ok(dasgupta_cost(&graph.inner, &tree.inner, None).map_err(to_py)?.value)
}

#[pyfunction]
fn revenue(graph: &PyGraph, tree: &PyTree) -> PyResult<f64> {
    Ok(mw_revenue(&graph.inner, &tree.inner, None).map_err(to_py)?.value)
}

/// Optimal tree and value by exhaustive enumeration (n <= 10).
#[pyfunction]
#[pyo3(signature = (graph, objective = "das"))]
fn brute_force(graph: &PyGraph, objective: &str) -> PyResult<(PyTree, f64)> {
    let objective: Objective = objective.parse().map_err(to_py)?;
    let best = brute_force_opt(&graph.inner, objective).map_err(to_py)?;
    Ok((
        PyTree {
            inner: Arc::new(best.tree),
        },
        best.value,
    ))
}

/// Sparsest bipartition `(a, b, sparsity)` by enumeration.
#[pyfunction]
#[pyo3(signature = (graph, exact_limit = 20))]
fn sparsest_cut(graph: &PyGraph, exact_limit: usize) -> PyResult<(Vec<usize>, Vec<usize>, f64)> {
    let cut = exact_sparsest_cut(&graph.inner, exact_limit).map_err(to_py)?;
    Ok((cut.a, cut.b, cut.sparsity))
}

#[pymodule]
fn hcsplit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyPartial>()?;
    m.add_class::<PyOracle>()?;
    m.add_class::<PyParams>()?;
    m.add("BuildFailed", m.py().get_type::<BuildFailed>())?;
    m.add_function(wrap_pyfunction!(planted, m)?)?;
    m.add_function(wrap_pyfunction!(build_strong, m)?)?;
    m.add_function(wrap_pyfunction!(build_weak, m)?)?;
    m.add_function(wrap_pyfunction!(py_hc_das, m)?)?;
    m.add_function(wrap_pyfunction!(py_hc_mw, m)?)?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(revenue, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(sparsest_cut, m)?)?;
    Ok(())
}
