//! Python bindings for the scheduling pipeline.
//!
//! Small artifacts (reports, series) cross as native Python objects;
//! large ones (the MDP, value/policy tables, estimated specs) cross as
//! JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sched_core::build::{build, BuildOptions};
use sched_core::config::{parse_config, ExperimentConfig, SamplingSpec};
use sched_core::error::ModelError;
use sched_core::learn::{estimate_system, Plant, SamplingConfig};
use sched_core::model::Mode;
use sched_core::safety::prune;
use sched_core::solve::value_iteration;
use sched_core::transition::TransitionModel;

fn err(e: ModelError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One experiment configuration plus the pipeline operations over it.
#[pyclass]
struct Experiment {
    cfg: ExperimentConfig,
}

impl Experiment {
    fn pruned(&self) -> Result<sched_core::safety::PrunedMdp, ModelError> {
        let model = TransitionModel::new(self.cfg.routes.clone(), self.cfg.rewards, self.cfg.mode)?;
        Ok(prune(build(model, BuildOptions::default())?))
    }
}

#[pymethods]
impl Experiment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            cfg: parse_config(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self {
            cfg: sched_core::config::load_config(path).map_err(err)?,
        })
    }

    #[getter]
    fn label(&self) -> String {
        self.cfg.label.clone()
    }

    #[getter]
    fn mode(&self) -> String {
        match self.cfg.mode {
            Mode::Preemptible => "preemptible".into(),
            Mode::NonPreemptible => "nonpreemptible".into(),
        }
    }

    /// Reachable state count, terminal included when present.
    fn state_count(&self) -> PyResult<usize> {
        Ok(self.pruned().map_err(err)?.base.state_count())
    }

    /// The explicit MDP as a JSON string.
    fn build_json(&self) -> PyResult<String> {
        let pm = self.pruned().map_err(err)?;
        serde_json::to_string(&pm.base.to_json_value()).map_err(|e| err(e.into()))
    }

    fn prune_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let report = self.pruned().map_err(err)?.report();
        let d = PyDict::new(py);
        d.set_item("states_total", report.states_total)?;
        d.set_item("states_pruned", report.states_pruned)?;
        d.set_item("actions_total", report.actions_total)?;
        d.set_item("actions_pruned", report.actions_pruned)?;
        d.set_item("schedulable", report.schedulable)?;
        Ok(d)
    }

    /// Value iteration over the safe sub-MDP; values, policy, and
    /// iteration count as a JSON string.
    fn solve_vi_json(&self) -> PyResult<String> {
        let pm = self.pruned().map_err(err)?;
        let vi = value_iteration(&pm, self.cfg.discount, 1e-6).map_err(err)?;
        let v = serde_json::json!({
            "iterations": vi.iterations,
            "values": vi.values.to_json_value(),
            "policy": vi.policy.to_json_value(),
        });
        serde_json::to_string(&v).map_err(|e| err(e.into()))
    }

    /// Samples the hidden plant and returns the estimated route specs
    /// as a JSON string.
    fn learn_json(&self) -> PyResult<String> {
        let sc = match self.cfg.sampling {
            SamplingSpec::Learn(sc) => sc,
            SamplingSpec::Oracle(_) => SamplingConfig::default(),
        };
        let model =
            TransitionModel::new(self.cfg.routes.clone(), self.cfg.rewards, Mode::Preemptible)
                .map_err(err)?;
        let pe_pruned = prune(build(model, BuildOptions::default()).map_err(err)?);
        let mut plant =
            Plant::new(self.cfg.routes.clone(), self.cfg.rewards, self.cfg.seed).map_err(err)?;
        let estimated = estimate_system(&mut plant, &pe_pruned, &sc).map_err(err)?;
        serde_json::to_string(&estimated).map_err(|e| err(e.into()))
    }

    /// Runs the configured trial campaign; windowed rows plus the final
    /// running mean.
    fn run_trials<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let series = sched_core::sim::run_trials(&self.cfg).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("rows", series.rows.clone())?;
        d.set_item("final_mean", series.final_mean())?;
        d.set_item("per_trial", series.per_trial.clone())?;
        Ok(d)
    }
}

/// `y = r * ceil((1 / (2 eps^2)) * (ln 2r - ln gamma))`.
#[pyfunction]
fn required_samples(support_size: usize, epsilon: f64, confidence_gamma: f64) -> PyResult<u64> {
    sched_core::learn::required_samples(support_size, epsilon, confidence_gamma).map_err(err)
}

#[pymodule]
fn sched_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(required_samples, m)?)?;
    Ok(())
}
