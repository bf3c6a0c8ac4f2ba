//! Python bindings: intervals, models, datasets, training and relevance
//! queries.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::sivia_relevance::relevance::FeatureRelevance;
use ::sivia_relevance::render::{heat_analysis, EpsPolicy};
use ::sivia_relevance::train::{evaluate, TrainConfig};
use ::sivia_relevance::{self as core, Error, IvBox, OutputSpec};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::IndexOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Closed interval with outward-rounded arithmetic.
#[pyclass(name = "Interval", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyInterval(core::Interval);

#[pymethods]
impl PyInterval {
    #[new]
    #[pyo3(signature = (lo, hi=None))]
    fn new(lo: f64, hi: Option<f64>) -> PyResult<Self> {
        core::Interval::new(lo, hi.unwrap_or(lo)).map(PyInterval).map_err(py_err)
    }

    #[getter]
    fn lo(&self) -> f64 {
        self.0.lo()
    }

    #[getter]
    fn hi(&self) -> f64 {
        self.0.hi()
    }

    fn width(&self) -> f64 {
        self.0.width()
    }

    fn mid(&self) -> f64 {
        self.0.mid()
    }

    fn contains(&self, x: f64) -> bool {
        self.0.contains(x)
    }

    fn __add__(&self, other: &PyInterval) -> PyInterval {
        PyInterval(self.0 + other.0)
    }

    fn __sub__(&self, other: &PyInterval) -> PyInterval {
        PyInterval(self.0 - other.0)
    }

    fn __mul__(&self, other: &PyInterval) -> PyInterval {
        PyInterval(self.0 * other.0)
    }

    fn __truediv__(&self, other: &PyInterval) -> PyResult<PyInterval> {
        self.0.div(&other.0).map(PyInterval).map_err(py_err)
    }

    fn __neg__(&self) -> PyInterval {
        PyInterval(-self.0)
    }

    fn exp(&self) -> PyInterval {
        PyInterval(self.0.exp())
    }

    fn tanh(&self) -> PyInterval {
        PyInterval(self.0.tanh())
    }

    fn logistic(&self) -> PyInterval {
        PyInterval(self.0.logistic())
    }

    fn __eq__(&self, other: &PyInterval) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Interval({:?}, {:?})", self.0.lo(), self.0.hi())
    }
}

/// Feed-forward classifier.
#[pyclass(name = "Model", frozen)]
struct PyModel(core::MlpModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::load_model(&path).map(PyModel).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        core::save_model(&self.0, &path).map_err(py_err)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.0.output_dim()
    }

    #[getter]
    fn class_labels(&self) -> Vec<String> {
        self.0.class_labels().to_vec()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&x).map_err(py_err)
    }

    /// Zero-based index of the winning output.
    fn predict(&self, x: Vec<f64>) -> PyResult<usize> {
        self.0.predict(&x).map_err(py_err)
    }

    /// Output enclosure for a box given as `(lo, hi)` pairs.
    fn forward_box(&self, bounds: Vec<(f64, f64)>) -> PyResult<Vec<(f64, f64)>> {
        let bx = IvBox::from_bounds(&bounds).map_err(py_err)?;
        let out = self.0.forward_box(&bx).map_err(py_err)?;
        Ok(out.components().iter().map(|c| (c.lo(), c.hi())).collect())
    }

    fn to_json(&self) -> String {
        core::data::model_to_json(&self.0)
    }
}

/// Scaled patterns with zero-based labels.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset(core::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        core::load_csv(&path, None).map(PyDataset).map_err(py_err)
    }

    #[staticmethod]
    fn load_mnist(images: PathBuf, labels: PathBuf) -> PyResult<Self> {
        core::load_mnist(&images, &labels).map(PyDataset).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn feature_count(&self) -> usize {
        self.0.feature_count()
    }

    #[getter]
    fn patterns(&self) -> Vec<Vec<f64>> {
        self.0.patterns.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels.clone()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.0.class_names.clone()
    }

    fn augment(&self, count: usize, seed: u64) -> PyResult<Self> {
        core::augment_random_features(&self.0, count, seed)
            .map(PyDataset)
            .map_err(py_err)
    }

    fn slice(&self, start: usize, len: usize) -> Self {
        PyDataset(self.0.slice(start, len))
    }
}

/// Train a one-hidden-layer network; returns `(model, final_loss, epochs)`.
#[pyfunction]
#[pyo3(signature = (dataset, hidden=2, loss="mse", learning_rate=0.5, momentum=0.0, max_epochs=10_000, goal=1e-3, seed=0, init_scale=0.5))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    dataset: &PyDataset,
    hidden: usize,
    loss: &str,
    learning_rate: f64,
    momentum: f64,
    max_epochs: usize,
    goal: f64,
    seed: u64,
    init_scale: f64,
) -> PyResult<(PyModel, f64, usize)> {
    let base = match loss {
        "mse" => TrainConfig::mse(hidden, seed),
        "cross-entropy" => TrainConfig::cross_entropy(hidden, seed),
        other => return Err(PyValueError::new_err(format!("unknown loss {other:?}"))),
    };
    let config = TrainConfig {
        learning_rate,
        momentum,
        max_epochs,
        goal_loss: goal,
        init_scale,
        ..base
    };
    let out = py
        .detach(|| core::train(&config, &dataset.0))
        .map_err(py_err)?;
    Ok((PyModel(out.model), out.final_loss, out.epochs))
}

/// Training-set accuracy and zero-based predictions.
#[pyfunction]
fn accuracy(model: &PyModel, dataset: &PyDataset) -> PyResult<(f64, Vec<usize>)> {
    let ev = evaluate(&model.0, &dataset.0).map_err(py_err)?;
    Ok((ev.accuracy, ev.predictions))
}

fn output_spec(model: &core::MlpModel, x: &[f64], node: usize, beta: f64, mode: &str) -> PyResult<OutputSpec> {
    match mode {
        "desired" => Ok(OutputSpec::desired(node, beta)),
        "as-predicted" | "at-least" => {
            let out = model.forward(x).map_err(py_err)?;
            let v = *out
                .get(node)
                .ok_or_else(|| PyIndexError::new_err(format!("node {node} out of range")))?;
            Ok(if mode == "as-predicted" {
                OutputSpec::as_predicted(node, v, beta)
            } else {
                OutputSpec::at_least(node, v)
            })
        }
        other => Err(PyValueError::new_err(format!(
            "mode must be \"desired\", \"as-predicted\" or \"at-least\", got {other:?}"
        ))),
    }
}

fn relevance_dict<'py>(py: Python<'py>, r: &FeatureRelevance) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("score", r.score.value)?;
    d.set_item("rule", r.score.rule.name())?;
    d.set_item("mu_active", r.score.mu_active)?;
    d.set_item("mu_undefined", r.score.mu_undefined)?;
    d.set_item("mu_range", r.score.mu_range)?;
    let segments: Vec<(f64, f64, String)> = r
        .partition
        .segments
        .iter()
        .map(|s| (s.interval.lo(), s.interval.hi(), s.family.letter().to_string()))
        .collect();
    d.set_item("segments", segments)?;
    Ok(d)
}

/// Partition and score of one feature; `node` is zero-based.
#[pyfunction]
#[pyo3(signature = (model, pattern, feature, node, beta=0.2, eps=1e-3, mode="desired"))]
#[allow(clippy::too_many_arguments)]
fn feature_relevance<'py>(
    py: Python<'py>,
    model: &PyModel,
    pattern: Vec<f64>,
    feature: usize,
    node: usize,
    beta: f64,
    eps: f64,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = output_spec(&model.0, &pattern, node, beta, mode)?;
    let r = py
        .detach(|| core::feature_relevance(&model.0, &pattern, feature, spec, eps))
        .map_err(py_err)?;
    relevance_dict(py, &r)
}

/// [`feature_relevance`] for every feature of a pattern.
#[pyfunction]
#[pyo3(signature = (model, pattern, node, beta=0.2, eps=1e-3, mode="desired"))]
fn pattern_relevance<'py>(
    py: Python<'py>,
    model: &PyModel,
    pattern: Vec<f64>,
    node: usize,
    beta: f64,
    eps: f64,
    mode: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = output_spec(&model.0, &pattern, node, beta, mode)?;
    let rs = py
        .detach(|| core::pattern_relevance(&model.0, &pattern, spec, eps))
        .map_err(py_err)?;
    rs.iter().map(|r| relevance_dict(py, r)).collect()
}

/// Per-input relevance for keeping output `class` at or above its current
/// value; returns `(scores, eps)`.
#[pyfunction]
#[pyo3(signature = (model, pattern, class_index, eps_policy="literal"))]
fn heat_scores(
    py: Python<'_>,
    model: &PyModel,
    pattern: Vec<f64>,
    class_index: usize,
    eps_policy: &str,
) -> PyResult<(Vec<f64>, f64)> {
    let policy: EpsPolicy = eps_policy.parse().map_err(py_err)?;
    let h = py
        .detach(|| heat_analysis(&model.0, &pattern, class_index, policy))
        .map_err(py_err)?;
    Ok((h.scores(), h.eps))
}

#[pymodule]
#[pyo3(name = "sivia_relevance")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInterval>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(feature_relevance, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_relevance, m)?)?;
    m.add_function(wrap_pyfunction!(heat_scores, m)?)?;
    Ok(())
}
