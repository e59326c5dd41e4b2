//! Python module `m2fgb`: datasets, training, prediction, model files,
//! metrics and the simplex projection.

use std::str::FromStr;

use m2fgb_core::booster::{self, BoosterConfig as CoreConfig, Model as CoreModel, TrainingTrace};
use m2fgb_core::data::{self, Dataset as CoreDataset, SplitSpec, SyntheticGroup, TaskKind};
use m2fgb_core::losses::{GroupLossKind, PointwiseLossKind};
use m2fgb_core::matrix::Matrix;
use m2fgb_core::metrics::{self, MetricName};
use m2fgb_core::{model_file, simplex, Error};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

#[pyclass(name = "Dataset", module = "m2fgb", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: CoreDataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a dataset from row lists; `task` is "binary" or "regression".
    #[new]
    #[pyo3(signature = (features, labels, groups, group_names, task = "binary"))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        groups: Vec<usize>,
        group_names: Vec<String>,
        task: &str,
    ) -> PyResult<Self> {
        let matrix = Matrix::from_rows(&features).map_err(py_err)?;
        let inner = CoreDataset::new(matrix, labels, groups, group_names, parse(task)?, None).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    /// `groups` holds `(name, fraction, positive_rate, signal_shift)` tuples.
    #[staticmethod]
    #[pyo3(signature = (n, groups, num_features = 5, noise = 1.0, seed = 0))]
    fn synthetic(n: usize, groups: Vec<(String, f64, f64, f64)>, num_features: usize, noise: f64, seed: u64) -> PyResult<Self> {
        let spec: Vec<SyntheticGroup> = groups
            .into_iter()
            .map(|(name, f, p, s)| SyntheticGroup::new(name, f, p, s))
            .collect();
        let inner = data::generate_synthetic(n, &spec, num_features, noise, seed).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn from_csv(path: &str, schema_path: &str) -> PyResult<Self> {
        let schema = data::ColumnSchema::from_file(schema_path).map_err(py_err)?;
        let inner = data::load_csv(path, &schema).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    /// Stratified split into (train, validation, test).
    #[pyo3(signature = (train = 0.6, validation = 0.2, test = 0.2, seed = 0))]
    fn split(&self, train: f64, validation: f64, test: f64, seed: u64) -> PyResult<(Self, Self, Self)> {
        let spec = SplitSpec::new(train, validation, test, seed).map_err(py_err)?;
        let (a, b, c) = data::stratified_split(&self.inner, &spec).map_err(py_err)?;
        Ok((PyDataset { inner: a }, PyDataset { inner: b }, PyDataset { inner: c }))
    }

    /// Fits scaling and one-hot encoding on this dataset.
    fn preprocess(&self) -> PyResult<(Self, PyPreprocessor)> {
        let (ds, pre, _) = data::preprocess(&self.inner).map_err(py_err)?;
        Ok((PyDataset { inner: ds }, PyPreprocessor { inner: pre }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    #[getter]
    fn num_groups(&self) -> usize {
        self.inner.num_groups()
    }

    #[getter]
    fn group_names(&self) -> Vec<String> {
        self.inner.group_names.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<f64> {
        self.inner.labels.clone()
    }

    #[getter]
    fn groups(&self) -> Vec<usize> {
        self.inner.groups.clone()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.features.iter_rows().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn task(&self) -> &'static str {
        self.inner.task.name()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, features={}, groups={}, task={})",
            self.inner.len(),
            self.inner.num_features(),
            self.inner.num_groups(),
            self.inner.task.name()
        )
    }
}

#[pyclass(name = "Preprocessor", module = "m2fgb", frozen)]
struct PyPreprocessor {
    inner: data::Preprocessor,
}

#[pymethods]
impl PyPreprocessor {
    fn transform(&self, ds: &PyDataset) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: self.inner.transform(&ds.inner).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPreprocessor {
            inner: data::Preprocessor::from_json(text).map_err(py_err)?,
        })
    }
}

#[pyclass(name = "BoosterConfig", module = "m2fgb", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    task: String,
    lambda_: f64,
    rounds: usize,
    learning_rate: f64,
    dual_learning_rate: f64,
    group_loss: String,
    max_depth: usize,
    min_samples_leaf: usize,
    l2_leaf_reg: f64,
    seed: u64,
    fresh_multipliers: bool,
}

impl PyConfig {
    fn to_core(&self) -> PyResult<CoreConfig> {
        let task: TaskKind = parse(&self.task)?;
        let mut c = CoreConfig::for_task(task);
        c.lambda = self.lambda_;
        c.rounds = self.rounds;
        c.learning_rate = self.learning_rate;
        c.dual_learning_rate = self.dual_learning_rate;
        c.group_kind = parse::<GroupLossKind>(&self.group_loss)?;
        c.tree.max_depth = self.max_depth;
        c.tree.min_samples_leaf = self.min_samples_leaf;
        c.tree.l2_leaf_reg = self.l2_leaf_reg;
        c.seed = self.seed;
        c.fresh_multipliers = self.fresh_multipliers;
        c.validate_for(task).map_err(py_err)?;
        Ok(c)
    }
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        task = "binary",
        lambda_ = 0.5,
        rounds = 100,
        learning_rate = 0.1,
        dual_learning_rate = 0.5,
        group_loss = "equalized",
        max_depth = 3,
        min_samples_leaf = 20,
        l2_leaf_reg = 0.0,
        seed = 0,
        fresh_multipliers = true,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        task: &str,
        lambda_: f64,
        rounds: usize,
        learning_rate: f64,
        dual_learning_rate: f64,
        group_loss: &str,
        max_depth: usize,
        min_samples_leaf: usize,
        l2_leaf_reg: f64,
        seed: u64,
        fresh_multipliers: bool,
    ) -> PyResult<Self> {
        let c = PyConfig {
            task: task.to_string(),
            lambda_,
            rounds,
            learning_rate,
            dual_learning_rate,
            group_loss: group_loss.to_string(),
            max_depth,
            min_samples_leaf,
            l2_leaf_reg,
            seed,
            fresh_multipliers,
        };
        c.to_core()?;
        Ok(c)
    }

    fn validate(&self) -> PyResult<()> {
        self.to_core().map(|_| ())
    }

    fn __repr__(&self) -> String {
        format!(
            "BoosterConfig(task={:?}, lambda_={}, rounds={}, learning_rate={}, dual_learning_rate={}, group_loss={:?})",
            self.task, self.lambda_, self.rounds, self.learning_rate, self.dual_learning_rate, self.group_loss
        )
    }
}

#[pyclass(name = "Model", module = "m2fgb", frozen)]
struct PyModel {
    inner: CoreModel,
}

#[pymethods]
impl PyModel {
    fn predict_scores(&self, ds: &PyDataset) -> PyResult<Vec<f64>> {
        self.inner.predict_scores(&ds.inner.features).map_err(py_err)
    }

    #[pyo3(signature = (ds, threshold = 0.5))]
    fn predict_labels(&self, ds: &PyDataset, threshold: f64) -> PyResult<Vec<f64>> {
        self.inner.predict_labels(&ds.inner.features, threshold).map_err(py_err)
    }

    /// Labels for classification, scores for regression.
    fn predict(&self, ds: &PyDataset) -> PyResult<Vec<f64>> {
        self.inner.predict(&ds.inner.features).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model_file::save(&self.inner, path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: model_file::load(path).map_err(py_err)?,
        })
    }

    fn to_text(&self) -> String {
        model_file::to_text(&self.inner)
    }

    #[getter]
    fn num_trees(&self) -> usize {
        self.inner.trees.len()
    }

    #[getter]
    fn base_score(&self) -> f64 {
        self.inner.base_score
    }
}

#[pyclass(name = "Trace", module = "m2fgb", frozen)]
struct PyTrace {
    inner: TrainingTrace,
}

#[pymethods]
impl PyTrace {
    /// Overall loss before training and after each round.
    #[getter]
    fn overall_loss(&self) -> Vec<f64> {
        std::iter::once(self.inner.initial_overall_loss)
            .chain(self.inner.rounds.iter().map(|r| r.overall_loss))
            .collect()
    }

    /// Per-group losses before training and after each round.
    #[getter]
    fn group_losses(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.inner.initial_group_losses.values.clone())
            .chain(self.inner.rounds.iter().map(|r| r.group_losses.values.clone()))
            .collect()
    }

    #[getter]
    fn multipliers(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.inner.initial_dual.mu.clone())
            .chain(self.inner.rounds.iter().map(|r| r.mu.clone()))
            .collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.rounds.len()
    }
}

/// Trains a fair booster; returns `(model, trace)`.
#[pyfunction]
fn train(ds: &PyDataset, config: &PyConfig) -> PyResult<(PyModel, PyTrace)> {
    let c = config.to_core()?;
    let (model, trace) = booster::train(&ds.inner, &c).map_err(py_err)?;
    Ok((PyModel { inner: model }, PyTrace { inner: trace }))
}

/// Plain boosting on the overall loss with the same tree settings.
#[pyfunction]
fn train_plain(ds: &PyDataset, config: &PyConfig) -> PyResult<PyModel> {
    let c = config.to_core()?;
    Ok(PyModel {
        inner: booster::train_plain(&ds.inner, &c).map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (v, scale = 1.0))]
fn project_simplex(v: Vec<f64>, scale: f64) -> PyResult<Vec<f64>> {
    simplex::project_scaled_simplex(&v, scale).map_err(py_err)
}

/// Per-group metric report as a dict.
#[pyfunction]
fn group_metric<'py>(
    py: Python<'py>,
    metric: &str,
    labels: Vec<f64>,
    predictions: Vec<f64>,
    groups: Vec<usize>,
    num_groups: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let m: MetricName = parse(metric)?;
    let r = metrics::group_metric(m, &labels, &predictions, &groups, num_groups).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("metric", m.name())?;
    d.set_item("values", r.values)?;
    d.set_item("worst_group_value", r.worst_group_value)?;
    d.set_item("worst_group_index", r.worst_group_index)?;
    d.set_item("disparity", r.disparity)?;
    Ok(d)
}

#[pyfunction]
fn overall_metric(metric: &str, labels: Vec<f64>, predictions: Vec<f64>) -> PyResult<f64> {
    metrics::overall_metric(parse(metric)?, &labels, &predictions).map_err(py_err)
}

#[pyfunction]
fn alpha_score(performance: f64, fairness: f64, alpha: f64) -> PyResult<f64> {
    metrics::alpha_score(performance, fairness, alpha).map_err(py_err)
}

#[pyfunction]
fn pointwise_loss(kind: &str, y: f64, score: f64) -> PyResult<(f64, f64)> {
    m2fgb_core::losses::pointwise_loss_and_gradient(parse::<PointwiseLossKind>(kind)?, y, score).map_err(py_err)
}

#[pymodule]
fn m2fgb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyPreprocessor>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(train_plain, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(group_metric, m)?)?;
    m.add_function(wrap_pyfunction!(overall_metric, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_score, m)?)?;
    m.add_function(wrap_pyfunction!(pointwise_loss, m)?)?;
    Ok(())
}
