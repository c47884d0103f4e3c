//! Experiment configuration: JSON ingestion and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::learn::SamplingConfig;
use crate::model::{Mode, RewardParams, RouteSpec};
use crate::solve::MctsConfig;

/// Policy used for simulated traversals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Vi,
    MctsEdf,
    MctsRandom,
    Edf,
}

impl std::str::FromStr for Solver {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vi" => Ok(Self::Vi),
            "mcts-edf" => Ok(Self::MctsEdf),
            "mcts-random" => Ok(Self::MctsRandom),
            "edf" => Ok(Self::Edf),
            other => Err(ModelError::InvalidConfig(format!(
                "solver: expected vi | mcts-edf | mcts-random | edf, got {other:?}"
            ))),
        }
    }
}

/// Either skip learning and trust the configured specs, or estimate the
/// distributions from a hidden plant first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SamplingSpec {
    Oracle(OracleKeyword),
    Learn(SamplingConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKeyword {
    Oracle,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self::Oracle(OracleKeyword::Oracle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub label: String,
    pub routes: Vec<RouteSpec>,
    #[serde(default = "RewardParams::default")]
    pub rewards: RewardParams,
    pub mode: Mode,
    pub solver: Solver,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_traversals")]
    pub traversals_per_trial: usize,
    #[serde(default = "default_stride")]
    pub report_stride: usize,
    #[serde(default)]
    pub seed: u64,
    /// VI discount; the paper's convergence parameter.
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub mcts: MctsConfig,
}

fn default_trials() -> usize {
    1000
}
fn default_traversals() -> usize {
    10
}
fn default_stride() -> usize {
    50
}
fn default_discount() -> f64 {
    0.99
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.routes.is_empty() {
            return Err(ModelError::InvalidConfig(
                "routes: at least one route required".into(),
            ));
        }
        for (i, r) in self.routes.iter().enumerate() {
            if r.route_id != i + 1 {
                return Err(ModelError::InvalidConfig(format!(
                    "routes[{i}].route_id: expected {} (routes are listed in id order), got {}",
                    i + 1,
                    r.route_id
                )));
            }
            r.validate()
                .map_err(|e| ModelError::InvalidConfig(format!("routes[{i}]: {e}")))?;
        }
        RewardParams::new(self.rewards.j_soft, self.rewards.j_hard)
            .map_err(|e| ModelError::InvalidConfig(format!("rewards: {e}")))?;
        if self.trials < 1 {
            return Err(ModelError::InvalidConfig("trials: must be >= 1".into()));
        }
        if self.traversals_per_trial < 1 {
            return Err(ModelError::InvalidConfig(
                "traversals_per_trial: must be >= 1".into(),
            ));
        }
        if self.report_stride < 1 || !self.trials.is_multiple_of(self.report_stride) {
            return Err(ModelError::InvalidConfig(format!(
                "report_stride: must be >= 1 and divide trials evenly, got stride {} for {} trials",
                self.report_stride, self.trials
            )));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(ModelError::InvalidConfig(format!(
                "discount: must lie in [0, 1), got {}",
                self.discount
            )));
        }
        if let SamplingSpec::Learn(sc) = self.sampling {
            if sc.samples < 1 {
                return Err(ModelError::InvalidConfig(
                    "sampling.samples: must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Parses and validates the documented JSON configuration format.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ModelError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ModelError> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}
