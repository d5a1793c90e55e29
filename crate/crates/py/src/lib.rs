//! Python bindings for `blindbounds`.
//!
//! Errors from invalid arguments surface as `ValueError`; a failed
//! inequality check raises `blindbounds.InvariantViolation`.

use std::collections::BTreeMap;

use blindbounds::audit::{run_audits as run_audit_suites, AuditConfig, APPROXIMATION_CONSTANT};
use blindbounds::bounds::{separation_pipeline, two_state_example as exact_two_state_example};
use blindbounds::dist::{parse_rational, rational_string};
use blindbounds::{defect, info, protocol, stochastic};
use blindbounds::{DefectBackend, DefectProblem, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(blindbounds, InvariantViolation, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvariantViolated(_) => InvariantViolation::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for blindbounds::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "Distribution", module = "blindbounds", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyDistribution {
    inner: blindbounds::Distribution,
}

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(probs: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: blindbounds::Distribution::new(probs).py()?,
        })
    }

    #[staticmethod]
    fn uniform(d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: blindbounds::Distribution::uniform(d).py()?,
        })
    }

    #[staticmethod]
    fn staircase(d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: blindbounds::Distribution::staircase(d).py()?,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.d()
    }

    fn __repr__(&self) -> String {
        format!("Distribution({:?})", self.inner.probs())
    }
}

#[pyclass(name = "StochasticMatrix", module = "blindbounds", frozen)]
pub struct PyStochasticMatrix {
    inner: blindbounds::StochasticMatrix,
}

#[pymethods]
impl PyStochasticMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: blindbounds::StochasticMatrix::from_rows(rows).py()?,
        })
    }

    #[staticmethod]
    fn identity(d: usize) -> Self {
        Self {
            inner: blindbounds::StochasticMatrix::identity(d),
        }
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows()
    }

    fn apply(&self, p: &PyDistribution) -> PyResult<PyDistribution> {
        Ok(PyDistribution {
            inner: stochastic::apply(&p.inner, &self.inner).py()?,
        })
    }

    fn __repr__(&self) -> String {
        format!("StochasticMatrix({:?})", self.inner.rows())
    }
}

#[pyclass(name = "ClassicalEnsemble", module = "blindbounds", frozen)]
pub struct PyEnsemble {
    inner: blindbounds::ClassicalEnsemble,
}

#[pymethods]
impl PyEnsemble {
    /// Equiprobable unless `priors` is given.
    #[new]
    #[pyo3(signature = (states, priors=None))]
    fn new(states: Vec<PyDistribution>, priors: Option<PyDistribution>) -> PyResult<Self> {
        let states = states.into_iter().map(|s| s.inner).collect();
        let inner = match priors {
            Some(p) => blindbounds::ClassicalEnsemble::new(p.inner, states),
            None => blindbounds::ClassicalEnsemble::equiprobable(states),
        }
        .py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn uniform_staircase(d: usize) -> PyResult<Self> {
        Ok(Self {
            inner: blindbounds::ClassicalEnsemble::uniform_staircase(d).py()?,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn labels(&self) -> usize {
        self.inner.labels()
    }

    fn holevo_information(&self) -> f64 {
        info::holevo_information(&self.inner).0
    }

    fn conditional_entropy(&self) -> f64 {
        info::conditional_entropy_c_given_x(&self.inner).0
    }

    fn defect_value(&self, m: &PyStochasticMatrix) -> PyResult<f64> {
        Ok(defect::defect_value(&self.inner, &m.inner).py()?.0)
    }
}

#[pyclass(name = "BucketProtocol", module = "blindbounds", frozen)]
pub struct PyBucketProtocol {
    inner: protocol::BucketProtocol,
}

#[pymethods]
impl PyBucketProtocol {
    #[new]
    fn new(rho: &PyDistribution, sigma: &PyDistribution, delta: f64, gamma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: protocol::build_protocol(&rho.inner, &sigma.inner, delta, gamma).py()?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("bucket table serializes")
    }

    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels()
    }

    #[getter]
    fn bits_sent(&self) -> f64 {
        self.inner.bits_sent()
    }

    /// 1-based `(row, col)` of the bucket holding symbol `a`.
    fn encode(&self, a: usize) -> PyResult<(usize, usize)> {
        let ix = self.inner.encode(a).py()?;
        Ok((ix.row, ix.col))
    }

    fn decode(&self, row: usize, col: usize, seed: u64) -> PyResult<usize> {
        self.inner.decode(protocol::BucketIndex { row, col }, seed).py()
    }

    fn induced_output(&self, input: &PyDistribution) -> PyResult<PyDistribution> {
        Ok(PyDistribution {
            inner: self.inner.induced_output(&input.inner).py()?,
        })
    }

    /// Exact local errors, cost and truncation masses as a dict.
    fn report<'py>(
        &self,
        py: Python<'py>,
        rho: &PyDistribution,
        sigma: &PyDistribution,
    ) -> PyResult<Bound<'py, PyDict>> {
        let r = protocol::report_for(&self.inner, &rho.inner, &sigma.inner).py()?;
        let out = PyDict::new(py);
        out.set_item("d", r.d)?;
        out.set_item("u", r.u)?;
        out.set_item("bits_sent", r.bits_sent)?;
        out.set_item("bits_sent_integer", r.bits_sent_integer)?;
        out.set_item("rate_bound", r.rate_bound)?;
        out.set_item("local_error_rho", r.local_error_rho)?;
        out.set_item("local_error_sigma", r.local_error_sigma)?;
        out.set_item("truncation_rho", r.truncation_rho)?;
        out.set_item("truncation_sigma", r.truncation_sigma)?;
        Ok(out)
    }

    /// `(estimate, exact, std_error)` of the local error from `copies` runs.
    fn monte_carlo(&self, input: &PyDistribution, copies: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
        let mc = protocol::monte_carlo_check(&self.inner, &input.inner, copies, seed).py()?;
        Ok((mc.estimate, mc.exact, mc.std_error))
    }
}

#[pyfunction]
fn entropy(p: &PyDistribution) -> f64 {
    info::entropy(&p.inner).0
}

#[pyfunction]
fn trace_distance(p: &PyDistribution, q: &PyDistribution) -> PyResult<f64> {
    info::trace_distance(&p.inner, &q.inner).py()
}

#[pyfunction]
fn kl_divergence(p: &PyDistribution, q: &PyDistribution) -> PyResult<f64> {
    Ok(info::kl_divergence(&p.inner, &q.inner).py()?.0)
}

#[pyfunction]
fn fidelity(p: &PyDistribution, q: &PyDistribution) -> PyResult<f64> {
    info::fidelity(&p.inner, &q.inner).py()
}

/// Exact rationals, as `"num/den"` strings, for the states (1/2, 1/2) and (1/3, 2/3).
#[pyfunction]
#[pyo3(signature = (eps="0"))]
fn two_state_example(eps: &str) -> PyResult<BTreeMap<&'static str, String>> {
    let x = exact_two_state_example(&parse_rational(eps).py()?).py()?;
    Ok(BTreeMap::from([
        ("single_copy", rational_string(&x.single_copy)),
        ("two_copy", rational_string(&x.two_copy)),
        ("gap", rational_string(&x.gap)),
        ("epsilon", rational_string(&x.epsilon)),
        ("defect_bound", rational_string(&x.defect_bound)),
    ]))
}

#[pyfunction]
fn separation_bound<'py>(py: Python<'py>, d: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = separation_pipeline(d).py()?;
    let out = PyDict::new(py);
    out.set_item("value", r.value)?;
    out.set_item("epsilon", r.epsilon)?;
    out.set_item("vacuous", r.vacuous)?;
    let terms = |ts: &[blindbounds::bounds::BoundTerm]| -> BTreeMap<String, f64> {
        ts.iter().map(|t| (t.name.clone(), t.value)).collect()
    };
    out.set_item("components", terms(&r.components))?;
    out.set_item("diagnostics", terms(&r.diagnostics))?;
    Ok(out)
}

#[pyfunction]
fn birkhoff_decompose(m: &PyStochasticMatrix) -> PyResult<(Vec<f64>, Vec<Vec<usize>>)> {
    let b = stochastic::birkhoff_decompose(&m.inner).py()?;
    Ok((b.weights, b.permutations))
}

#[pyfunction]
fn approx_doubly_stochastic(m: &PyStochasticMatrix, eps: f64) -> PyResult<PyStochasticMatrix> {
    Ok(PyStochasticMatrix {
        inner: stochastic::approx_doubly_stochastic(&m.inner, eps).py()?,
    })
}

#[pyfunction]
#[pyo3(signature = (ensemble, eps, backend="penalty-gradient", seed=0, restarts=50))]
fn minimize_defect<'py>(
    py: Python<'py>,
    ensemble: &PyEnsemble,
    eps: f64,
    backend: &str,
    seed: u64,
    restarts: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let backend = match backend {
        "penalty-gradient" => DefectBackend::PenaltyGradient,
        "grid-oracle" => DefectBackend::GridOracle,
        other => return Err(PyValueError::new_err(format!("unknown backend {other:?}"))),
    };
    let problem = DefectProblem::new(ensemble.inner.clone(), eps, backend)
        .py()?
        .with_seed(seed)
        .with_restarts(restarts);
    let s = py.detach(|| defect::minimize_defect(&problem)).py()?;
    let out = PyDict::new(py);
    out.set_item("matrix", PyStochasticMatrix { inner: s.matrix })?;
    out.set_item("value", s.value.0)?;
    out.set_item("marginal_error", s.marginal_error)?;
    out.set_item("constraint_slack", s.constraint_slack)?;
    Ok(out)
}

/// Koashi-Imoto error functions `(f, lambda, g)` of the bucketing protocol
/// on the uniform/staircase pair with `delta = gamma = log²d/√d`.
#[pyfunction]
fn ki_sensitivity(d: usize) -> PyResult<(f64, f64, f64)> {
    let k = protocol::ki_sensitivity(d).py()?;
    Ok((k.f, k.lambda, k.g))
}

/// Every audit suite; returns one dict per suite.
#[pyfunction]
#[pyo3(signature = (seed=0, trials=1000, d_max=6, approximation_constant=APPROXIMATION_CONSTANT))]
fn run_audits<'py>(
    py: Python<'py>,
    seed: u64,
    trials: usize,
    d_max: usize,
    approximation_constant: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = AuditConfig {
        seed,
        trials,
        d_max,
        approximation_constant,
    };
    let outcomes = py.detach(|| run_audit_suites(&cfg)).py()?;
    outcomes
        .into_iter()
        .map(|o| {
            let out = PyDict::new(py);
            out.set_item("suite", o.suite)?;
            out.set_item("instances", o.instances)?;
            out.set_item("violations", o.violations)?;
            out.set_item("worst_margin", o.worst_margin)?;
            out.set_item("passed", o.violations == 0)?;
            Ok(out)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "blindbounds")]
pub fn py_blindbounds(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InvariantViolation", m.py().get_type::<InvariantViolation>())?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyStochasticMatrix>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyBucketProtocol>()?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(two_state_example, m)?)?;
    m.add_function(wrap_pyfunction!(separation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(birkhoff_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(approx_doubly_stochastic, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_defect, m)?)?;
    m.add_function(wrap_pyfunction!(ki_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(run_audits, m)?)?;
    Ok(())
}
