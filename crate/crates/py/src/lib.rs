//! Python bindings for `qite_core`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qite_core::circuit::{depth, step_resources, trajectory_circuits, Circuit};
use qite_core::graph::resolve_graph;
use qite_core::hamiltonian::{brute_force_spectrum, maxcut_hamiltonian};
use qite_core::noise::{replay, NoiseModel};
use qite_core::pools::{build_pool, build_pools, interaction_set};
use qite_core::qite::{run, Evaluation, RunOptions, Trajectory, UpdateMode};
use qite_core::{DomainSpec, Edge, Error, Hamiltonian, Method};

fn py_err(e: Error) -> PyErr {
    if e.is_numeric() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for qite_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "PauliString", frozen, eq, hash, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyPauliString(qite_core::PauliString);

#[pymethods]
impl PyPauliString {
    /// Parses letters like `"XIZY"`; the first letter acts on qubit 0.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse().map(PyPauliString).py()
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    #[getter]
    fn weight(&self) -> usize {
        self.0.weight()
    }

    fn support(&self) -> Vec<usize> {
        self.0.support()
    }

    fn commutes_with(&self, other: &PyPauliString) -> bool {
        self.0.commutes_with(&other.0)
    }

    /// Returns `(k, string)` with `self * other = i^k * string`.
    fn multiply(&self, other: &PyPauliString) -> PyResult<(u8, PyPauliString)> {
        let p = self.0.multiply(&other.0).py()?;
        Ok((p.phase.exponent(), PyPauliString(p.string)))
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("PauliString('{}')", self.0)
    }
}

#[pyclass(name = "Graph", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph(qite_core::Graph);

#[pymethods]
impl PyGraph {
    /// `edges` is a list of `(i, j)` or `(i, j, weight)` tuples.
    #[new]
    fn new(n_vertices: usize, edges: Vec<Vec<f64>>) -> PyResult<Self> {
        let mut out = Vec::with_capacity(edges.len());
        for e in edges {
            let (i, j, weight) = match e.as_slice() {
                [i, j] => (*i, *j, 1.0),
                [i, j, w] => (*i, *j, *w),
                _ => {
                    return Err(PyValueError::new_err(
                        "edge must be (i, j) or (i, j, weight)",
                    ))
                }
            };
            if i < 0.0 || j < 0.0 || i.fract() != 0.0 || j.fract() != 0.0 {
                return Err(PyValueError::new_err(
                    "vertex indices must be non-negative integers",
                ));
            }
            out.push(Edge {
                i: i as usize,
                j: j as usize,
                weight,
            });
        }
        qite_core::Graph::new(n_vertices, out).map(PyGraph).py()
    }

    /// `petersen`, `kN`, `cN`, `regular3`, `weighted` or a graph-file path.
    #[staticmethod]
    #[pyo3(signature = (spec, vertices=None, seed=7))]
    fn named(spec: &str, vertices: Option<usize>, seed: u64) -> PyResult<Self> {
        resolve_graph(spec, vertices, seed).map(PyGraph).py()
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        qite_core::Graph::parse(text).map(PyGraph).py()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.0.n_vertices()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.0
            .edges()
            .iter()
            .map(|e| (e.i, e.j, e.weight))
            .collect()
    }

    fn cut_value(&self, assignment: u64) -> f64 {
        self.0.cut_value(assignment)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(n_vertices={}, n_edges={})",
            self.0.n_vertices(),
            self.0.edges().len()
        )
    }
}

fn hamiltonian(g: &PyGraph) -> PyResult<Hamiltonian> {
    maxcut_hamiltonian(&g.0).py()
}

fn domain(method: &str, domain_size: usize) -> PyResult<DomainSpec> {
    let m: Method = method.parse().py()?;
    Ok(DomainSpec::new(m, domain_size))
}

/// Max-cut energy of every basis state.
#[pyfunction]
fn energies(graph: &PyGraph) -> PyResult<Vec<f64>> {
    hamiltonian(graph)?.diagonal_energies().py()
}

/// `(ground_energy, ground_states, [(energy, degeneracy), ...])`.
#[pyfunction]
fn spectrum(graph: &PyGraph) -> PyResult<(f64, Vec<usize>, Vec<(f64, usize)>)> {
    let s = brute_force_spectrum(&hamiltonian(graph)?).py()?;
    let levels = s.levels.iter().map(|l| (l.energy, l.degeneracy)).collect();
    Ok((s.ground_energy, s.ground_states, levels))
}

#[pyfunction]
fn interaction_qubits(graph: &PyGraph, term: usize) -> PyResult<Vec<usize>> {
    let h = hamiltonian(graph)?;
    if term >= h.n_terms() {
        return Err(PyValueError::new_err(format!("term {term} out of range")));
    }
    Ok(interaction_set(&h, term))
}

/// Pool strings in canonical order. `term` is required for LA and eLA.
#[pyfunction]
#[pyo3(signature = (graph, method, domain_size, term=None))]
fn pool(
    graph: &PyGraph,
    method: &str,
    domain_size: usize,
    term: Option<usize>,
) -> PyResult<Vec<PyPauliString>> {
    let h = hamiltonian(graph)?;
    let p = build_pool(&domain(method, domain_size)?, &h, term).py()?;
    Ok(p.strings().iter().map(|s| PyPauliString(*s)).collect())
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: Trajectory,
    graph: qite_core::Graph,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn label(&self) -> String {
        self.inner.spec.label()
    }

    #[getter]
    fn taus(&self) -> Vec<f64> {
        self.inner.steps.iter().map(|s| s.tau).collect()
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies()
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.inner.steps.iter().map(|s| s.r).collect()
    }

    #[getter]
    fn final_energy(&self) -> f64 {
        self.inner.final_energy()
    }

    #[getter]
    fn final_r(&self) -> f64 {
        self.inner.final_r()
    }

    #[getter]
    fn ground_energy(&self) -> f64 {
        self.inner.ground_energy
    }

    #[getter]
    fn pool_sizes(&self) -> Vec<usize> {
        self.inner.pool_sizes.clone()
    }

    /// `(start_step, end_step)` of every compression block.
    #[getter]
    fn blocks(&self) -> Vec<(usize, usize)> {
        self.inner
            .blocks
            .iter()
            .map(|b| (b.start_step, b.end_step))
            .collect()
    }

    #[getter]
    fn stopped_early(&self) -> bool {
        self.inner.stopped_early
    }

    /// `[(E, n(E)), ...]` at every recorded step.
    #[getter]
    fn populations(&self) -> Vec<Vec<(f64, f64)>> {
        self.inner
            .steps
            .iter()
            .map(|s| s.populations.clone())
            .collect()
    }

    #[getter]
    fn final_state(&self) -> Vec<Complex64> {
        self.inner.final_state.amplitudes().to_vec()
    }

    /// Replays the run's circuits from the uniform state with and without
    /// noise. Returns `(energy_ideal, energy_noisy, depth)`.
    #[pyo3(signature = (t1_us=None, t2_us=None, tg1_ns=None, tg2_ns=None, readout=None))]
    fn replay(
        &self,
        t1_us: Option<f64>,
        t2_us: Option<f64>,
        tg1_ns: Option<f64>,
        tg2_ns: Option<f64>,
        readout: Option<[[f64; 2]; 2]>,
    ) -> PyResult<(f64, f64, usize)> {
        let mut nm = NoiseModel::default();
        nm.t1_us = t1_us.unwrap_or(nm.t1_us);
        nm.t2_us = t2_us.unwrap_or(nm.t2_us);
        nm.tg1_ns = tg1_ns.unwrap_or(nm.tg1_ns);
        nm.tg2_ns = tg2_ns.unwrap_or(nm.tg2_ns);
        nm.readout = readout.unwrap_or(nm.readout);
        let h = maxcut_hamiltonian(&self.graph).py()?;
        let pools = build_pools(&self.inner.spec, &h).py()?;
        let circuits = trajectory_circuits(&self.inner, &pools, h.n_qubits()).py()?;
        let r = replay(&circuits, &h, &nm).py()?;
        let mut all = Circuit::new(h.n_qubits());
        for c in &circuits {
            all.append(c).py()?;
        }
        Ok((r.energy_ideal, r.energy_noisy, depth(&all)))
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory({}, steps={}, final_energy={:.6}, final_r={:.4})",
            self.inner.spec.label(),
            self.inner.steps.len() - 1,
            self.inner.final_energy(),
            self.inner.final_r()
        )
    }
}

/// Runs QITE from the uniform superposition.
#[pyfunction]
#[pyo3(signature = (
    graph, method="nla", domain_size=2, dtau=0.01, n_steps=1000, compress=false,
    evaluation="step_state", update="product_formula", ridge=None, record_coefficients=false,
))]
#[allow(clippy::too_many_arguments)]
fn run_qite(
    py: Python<'_>,
    graph: &PyGraph,
    method: &str,
    domain_size: usize,
    dtau: f64,
    n_steps: usize,
    compress: bool,
    evaluation: &str,
    update: &str,
    ridge: Option<f64>,
    record_coefficients: bool,
) -> PyResult<PyTrajectory> {
    let h = hamiltonian(graph)?;
    let spec = domain(method, domain_size)?;
    let mut opts = RunOptions::new(dtau, n_steps);
    opts.compress = compress;
    opts.evaluation = evaluation.parse::<Evaluation>().py()?;
    opts.update = update.parse::<UpdateMode>().py()?;
    opts.record_coefficients = record_coefficients || !compress;
    if let Some(r) = ridge {
        opts.ridge = r;
    }
    let inner = py.detach(|| run(&h, &spec, &opts)).py()?;
    Ok(PyTrajectory {
        inner,
        graph: graph.0.clone(),
    })
}

/// Gate count, depth and closed-form pool bound of one imaginary-time step.
#[pyfunction]
fn resources(graph: &PyGraph, method: &str, domain_size: usize) -> PyResult<(u64, u64, u64, u128)> {
    let h = hamiltonian(graph)?;
    let spec = domain(method, domain_size)?;
    let pools = build_pools(&spec, &h).py()?;
    let r = step_resources(&h, &spec, &pools).py()?;
    Ok((r.gate_count, r.cnot_count, r.depth, r.table1_bound))
}

#[pymodule]
fn qite_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPauliString>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(energies, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(interaction_qubits, m)?)?;
    m.add_function(wrap_pyfunction!(pool, m)?)?;
    m.add_function(wrap_pyfunction!(run_qite, m)?)?;
    m.add_function(wrap_pyfunction!(resources, m)?)?;
    Ok(())
}
