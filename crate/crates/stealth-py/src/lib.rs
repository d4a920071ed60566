//! Python bindings: competence similarity, trust scoring, synthetic mobility
//! and scenario experiments, driven in-process.
//!
//! Build the cdylib with `cargo build -p stealth-py --release` and import the
//! resulting shared library as `stealth_py` (see python/smoke_test.py).

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use stealth_core::harness::{
    build_scenario, run_experiment, Overrides, SkillAssignment, TraceSource,
};
use stealth_core::simkit::{MobilityTrace, SyntheticParams};
use stealth_core::taxonomy;
use stealth_core::trust;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Healthcare competence taxonomy with similarity to the reference
/// competence (`doctor`).
#[pyclass(frozen)]
struct SkillTaxonomy {
    inner: taxonomy::SkillTaxonomy,
}

#[pymethods]
impl SkillTaxonomy {
    /// The built-in healthcare taxonomy.
    #[staticmethod]
    fn default() -> Self {
        SkillTaxonomy {
            inner: taxonomy::build_default_taxonomy(),
        }
    }

    /// Load a taxonomy from an edge-list config file (`child<TAB>parent`,
    /// root declared as `root<TAB>-`).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(SkillTaxonomy {
            inner: taxonomy::SkillTaxonomy::load(&path).map_err(value_err)?,
        })
    }

    fn labels(&self) -> Vec<String> {
        self.inner.labels().map(String::from).collect()
    }

    fn contains(&self, skill: &str) -> bool {
        self.inner.contains(skill)
    }

    /// Edge count from the competence up to the taxonomy root.
    fn depth_to_root(&self, skill: &str) -> PyResult<u32> {
        self.inner.depth_to_root(skill).map_err(value_err)
    }

    /// Similarity of the competence to the reference competence, in [0, 1].
    fn similarity(&self, skill: &str) -> PyResult<f64> {
        Ok(self
            .inner
            .similarity_to_reference(skill)
            .map_err(value_err)?
            .value())
    }

    fn __repr__(&self) -> String {
        format!("SkillTaxonomy({} labels)", self.inner.len())
    }
}

fn interest_set(labels: Vec<String>) -> PyResult<trust::InterestSet> {
    trust::InterestSet::new(labels).map_err(value_err)
}

/// Interest trust of an evaluator over an evaluated node: shared-interest
/// ratio relative to the evaluator, zero unless the evaluated node is
/// health-interested.
#[pyfunction]
fn interest_trust(evaluator: Vec<String>, evaluated: Vec<String>) -> PyResult<f64> {
    Ok(trust::interest_trust(
        &interest_set(evaluator)?,
        &interest_set(evaluated)?,
    ))
}

/// Skill trust: taxonomy similarity of the evaluated competence.
#[pyfunction]
fn skill_trust(tax: &SkillTaxonomy, evaluated_skill: &str) -> PyResult<f64> {
    trust::skill_trust(&tax.inner, evaluated_skill).map_err(value_err)
}

/// Total trust `(interest_trust, skill_trust, total)` of an evaluator over
/// an evaluated node.
#[pyfunction]
fn total_trust(
    evaluator: Vec<String>,
    evaluated: Vec<String>,
    evaluated_skill: &str,
    tax: &SkillTaxonomy,
) -> PyResult<(f64, f64, f64)> {
    let score = trust::total_trust(
        &interest_set(evaluator)?,
        &interest_set(evaluated)?,
        evaluated_skill,
        &tax.inner,
    )
    .map_err(value_err)?;
    Ok((score.interest_trust, score.skill_trust, score.total))
}

/// Generate a seeded random-waypoint trace and write it as CSV.
#[pyfunction]
#[pyo3(signature = (path, n_nodes, duration_s, seed, area=(400.0, 430.0), speed=(0.5, 2.0), snapshot_interval_s=0.6))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic_trace(
    path: PathBuf,
    n_nodes: u32,
    duration_s: f64,
    seed: u64,
    area: (f64, f64),
    speed: (f64, f64),
    snapshot_interval_s: f64,
) -> PyResult<usize> {
    let trace = MobilityTrace::generate_synthetic(
        &SyntheticParams {
            n_nodes,
            area,
            speed_range: speed,
            duration_s,
            snapshot_interval_s,
        },
        seed,
    )
    .map_err(value_err)?;
    std::fs::write(&path, trace.to_csv()).map_err(runtime_err)?;
    Ok(trace.snapshot_count())
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

/// Run a scenario experiment and return the metrics report as a dict.
///
/// `scenario` is one of senack, seack, meack. Repetitions use seeds
/// `seed + rep`; synthetic mobility is the default trace source.
#[pyfunction]
#[pyo3(signature = (scenario, seed=None, reps=None, nodes=None, duration_s=None,
                    emergency_time_s=None, radius_m=None, announce_interval_s=None,
                    ack_timeout_ms=None, workers=None, skill_assignment=None,
                    trace_file=None, out_dir=None))]
#[allow(clippy::too_many_arguments)]
fn run_scenario(
    py: Python<'_>,
    scenario: &str,
    seed: Option<u64>,
    reps: Option<u32>,
    nodes: Option<u32>,
    duration_s: Option<f64>,
    emergency_time_s: Option<f64>,
    radius_m: Option<f64>,
    announce_interval_s: Option<f64>,
    ack_timeout_ms: Option<f64>,
    workers: Option<u32>,
    skill_assignment: Option<String>,
    trace_file: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let overrides = Overrides {
        n_nodes: nodes,
        duration_s,
        emergency_time_s,
        announce_interval_s,
        ack_timeout_ms,
        radius_m,
        repetitions: reps,
        seed,
        skill_assignment: skill_assignment
            .as_deref()
            .map(SkillAssignment::parse)
            .transpose()
            .map_err(value_err)?,
        workers,
    };
    let config = build_scenario(scenario, &overrides).map_err(value_err)?;
    let source = match trace_file {
        Some(path) => TraceSource::File(path),
        None => TraceSource::Synthetic,
    };
    let output = py
        .detach(|| run_experiment(&config, &source, out_dir.as_deref()))
        .map_err(runtime_err)?;

    let mut report = serde_json::to_value(&output.report).map_err(runtime_err)?;
    if let serde_json::Value::Object(map) = &mut report {
        map.insert(
            "scenario".into(),
            serde_json::Value::String(config.kind.as_str().into()),
        );
        map.insert(
            "invalid_reps".into(),
            serde_json::to_value(&output.invalid_reps).map_err(runtime_err)?,
        );
    }
    Ok(json_to_py(py, &report)?.unbind())
}

/// Similarity table of the built-in taxonomy as `{label: similarity}`.
#[pyfunction]
fn taxonomy_table() -> PyResult<BTreeMap<String, f64>> {
    let tax = taxonomy::build_default_taxonomy();
    tax.labels()
        .map(|label| {
            Ok((
                label.to_string(),
                tax.similarity_to_reference(label).map_err(value_err)?.value(),
            ))
        })
        .collect()
}

#[pymodule]
fn stealth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<SkillTaxonomy>()?;
    m.add_function(wrap_pyfunction!(interest_trust, m)?)?;
    m.add_function(wrap_pyfunction!(skill_trust, m)?)?;
    m.add_function(wrap_pyfunction!(total_trust, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic_trace, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(taxonomy_table, m)?)?;
    Ok(())
}
