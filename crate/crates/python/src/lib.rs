//! Python bindings: datasets, training, recommendation and evaluation.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use tplrec_core::agent::{recommend, RecommendMode};
use tplrec_core::artifacts::{load_model, save_model, LoadedModel};
use tplrec_core::config::RunConfig;
use tplrec_core::data::{InteractionDataset, PopularityTable};
use tplrec_core::eval::{self, FoldMetrics, MetricsReport};
use tplrec_core::pipeline::train_model;
use tplrec_core::synthetic::{self, HeadTailConfig, PlantedConfig};
use tplrec_core::{Error, ErrorClass};

fn to_py(e: Error) -> PyErr {
    match (&e, e.class()) {
        (Error::Io(_), _) => PyOSError::new_err(e.to_string()),
        (_, ErrorClass::Numeric) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Dataset", module = "tplrec", frozen)]
struct PyDataset {
    inner: InteractionDataset,
}

#[pymethods]
impl PyDataset {
    /// Build from `(project, library)` pairs; duplicates are collapsed.
    #[staticmethod]
    fn from_pairs(pairs: Vec<(String, String)>) -> PyResult<Self> {
        let inner = InteractionDataset::from_pairs(pairs.iter().map(|(p, l)| (p.as_str(), l.as_str()))).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Read a tab-separated interaction file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let file = File::open(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        let (inner, _) = InteractionDataset::ingest(BufReader::new(file)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Community-structured synthetic data.
    #[staticmethod]
    #[pyo3(signature = (projects=200, libraries=200, communities=4, per_project=20, noise=0.1, seed=0))]
    fn planted(
        projects: usize,
        libraries: usize,
        communities: usize,
        per_project: usize,
        noise: f64,
        seed: u64,
    ) -> PyResult<Self> {
        if communities == 0 || communities > libraries || per_project == 0 || !(0.0..=1.0).contains(&noise) {
            return Err(PyValueError::new_err("invalid planted dataset parameters"));
        }
        let cfg = PlantedConfig {
            projects,
            libraries,
            communities,
            per_project,
            noise,
            ..PlantedConfig::default()
        };
        Ok(Self {
            inner: synthetic::planted(&cfg, seed).dataset,
        })
    }

    /// Synthetic data with 20 very popular libraries and a long tail of 180.
    #[staticmethod]
    #[pyo3(signature = (seed=0))]
    fn head_tail(seed: u64) -> Self {
        Self {
            inner: synthetic::head_tail(&HeadTailConfig::default(), seed),
        }
    }

    #[getter]
    fn n_projects(&self) -> usize {
        self.inner.n_projects()
    }

    #[getter]
    fn n_libraries(&self) -> usize {
        self.inner.n_libraries()
    }

    #[getter]
    fn n_interactions(&self) -> usize {
        self.inner.n_interactions()
    }

    fn project_ids(&self) -> Vec<String> {
        self.inner.project_ids().to_vec()
    }

    fn library_ids(&self) -> Vec<String> {
        self.inner.library_ids().to_vec()
    }

    fn libraries_of(&self, project: &str) -> PyResult<Vec<String>> {
        let p = self
            .inner
            .project_ids()
            .iter()
            .position(|id| id == project)
            .ok_or_else(|| PyValueError::new_err(format!("unknown project {project:?}")))?;
        Ok(self
            .inner
            .libraries_of(p as u32)
            .iter()
            .map(|&l| self.inner.library_id(l).to_owned())
            .collect())
    }

    /// Share of projects using each library, in catalogue order.
    fn popularity(&self) -> Vec<f64> {
        PopularityTable::from_dataset(&self.inner).rates()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(projects={}, libraries={}, interactions={})",
            self.inner.n_projects(),
            self.inner.n_libraries(),
            self.inner.n_interactions()
        )
    }
}

#[pyclass(name = "Config", module = "tplrec", frozen)]
struct PyConfig {
    inner: RunConfig,
}

fn override_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(b) = value.extract::<bool>() {
        return Ok(b.to_string());
    }
    if let Ok(i) = value.extract::<i64>() {
        return Ok(i.to_string());
    }
    if let Ok(f) = value.extract::<f64>() {
        return Ok(format!("{f:?}"));
    }
    value.str()?.extract()
}

#[pymethods]
impl PyConfig {
    /// Defaults, then the optional config file, then keyword overrides.
    #[new]
    #[pyo3(signature = (path=None, **overrides))]
    fn new(path: Option<PathBuf>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut pairs = Vec::new();
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                pairs.push((k.extract::<String>()?, override_text(&v)?));
            }
        }
        let inner = RunConfig::load(path.as_deref(), &pairs).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn __repr__(&self) -> String {
        format!("Config(protocol={:?}, seed={})", self.inner.protocol, self.inner.seed)
    }
}

#[pyclass(name = "Model", module = "tplrec", frozen)]
struct PyModel {
    inner: LoadedModel,
}

#[pymethods]
impl PyModel {
    /// Train on the whole dataset; with `output`, also write the artifacts.
    #[staticmethod]
    #[pyo3(signature = (dataset, config, output=None))]
    fn train(py: Python<'_>, dataset: &PyDataset, config: &PyConfig, output: Option<PathBuf>) -> PyResult<Self> {
        let ds = &dataset.inner;
        let cfg = &config.inner;
        let model = py
            .detach(|| -> Result<_, Error> {
                let model = train_model(ds, &cfg.embed_config(), cfg.lambda, &cfg.agent_config())?;
                if let Some(dir) = &output {
                    save_model(dir, &model, ds, cfg)?;
                }
                Ok(model)
            })
            .map_err(to_py)?;
        Ok(Self {
            inner: LoadedModel::new(model.network, model.representatives, ds.library_ids().to_vec()),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_model(&path).map_err(to_py)?,
        })
    }

    #[getter]
    fn n_libraries(&self) -> usize {
        self.inner.library_ids.len()
    }

    /// Ranked `(library_id, q_value)` pairs for a set of known libraries.
    #[pyo3(signature = (query, k=10, mode="sequential"))]
    fn recommend(&self, query: Vec<String>, k: usize, mode: &str) -> PyResult<Vec<(String, f64)>> {
        let mode: RecommendMode = mode.parse().map_err(to_py)?;
        let ids = self
            .inner
            .resolve(&query)
            .map_err(|unknown| PyValueError::new_err(format!("unknown library id(s): {}", unknown.join(", "))))?;
        let recs = recommend(&ids, k, &self.inner.network, &self.inner.representatives, mode).map_err(to_py)?;
        Ok(recs
            .into_iter()
            .map(|r| (self.inner.library_ids[r.library as usize].clone(), r.q_value))
            .collect())
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &FoldMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (name, v) in FoldMetrics::NAMES.iter().zip(m.values()) {
        d.set_item(*name, v)?;
    }
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("protocol", r.protocol.as_str())?;
    d.set_item("k", r.k)?;
    d.set_item("seed", r.seed)?;
    d.set_item("dropped", r.dropped())?;
    d.set_item("incomplete", r.incomplete())?;
    match &r.average {
        Some(avg) => d.set_item("average", metrics_dict(py, avg)?)?,
        None => d.set_item("average", py.None())?,
    }
    let folds = PyList::empty(py);
    for f in &r.folds {
        let fd = PyDict::new(py);
        fd.set_item("fold", f.fold)?;
        fd.set_item("evaluated", f.evaluated)?;
        fd.set_item("dropped", f.dropped)?;
        fd.set_item("error", f.error.as_deref())?;
        match &f.metrics {
            Some(m) => fd.set_item("metrics", metrics_dict(py, m)?)?,
            None => fd.set_item("metrics", py.None())?,
        }
        folds.append(fd)?;
    }
    d.set_item("folds", folds)?;
    let mut kv = Vec::new();
    eval::write_kv(r, &mut kv).map_err(|e| PyOSError::new_err(e.to_string()))?;
    d.set_item("kv", String::from_utf8_lossy(&kv).into_owned())?;
    Ok(d)
}

/// Run the configured cross-validation protocol and return the report as a
/// dict with per-fold and averaged metrics (percent).
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, dataset: &PyDataset, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.eval_config().map_err(to_py)?;
    let ds = &dataset.inner;
    let report = py.detach(|| eval::run_protocol(ds, &cfg)).map_err(to_py)?;
    report_dict(py, &report)
}

/// `(precision, recall)` in percent, or `None` for an empty ground truth.
#[pyfunction]
fn precision_recall_at_k(recommended: Vec<u32>, truth: Vec<u32>, k: usize) -> Option<(f64, f64)> {
    eval::precision_recall_at_k(&recommended, &truth, k)
}

#[pyfunction]
fn coverage_at_k(recommended: Vec<Vec<u32>>, n_libraries: usize, k: usize) -> f64 {
    eval::coverage_at_k(&recommended, n_libraries, k)
}

#[pymodule]
fn tplrec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(precision_recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_at_k, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
