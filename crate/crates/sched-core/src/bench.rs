//! Scalability benchmarks: build and VI-solve a suite of configurations
//! in both modes, recording state counts and wall-clock solve times.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::build::{build, BuildOptions};
use crate::config::{ExperimentConfig, SamplingSpec, Solver};
use crate::error::ModelError;
use crate::model::{Mode, RewardParams, RouteClass, RouteSpec};
use crate::probvec::ProbVec;
use crate::safety::prune;
use crate::solve::value_iteration;
use crate::transition::TransitionModel;

/// One benchmark measurement: a configuration solved in one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub label: String,
    pub mode: Mode,
    /// State count including the terminal state, when present.
    pub states: usize,
    pub states_without_terminal: usize,
    pub vi_iterations: usize,
    pub seconds: f64,
    /// Per-row failure; the suite keeps going.
    pub error: Option<String>,
}

fn bench_one(label: &str, cfg: &ExperimentConfig, mode: Mode) -> BenchRow {
    let mut row = BenchRow {
        label: label.to_string(),
        mode,
        states: 0,
        states_without_terminal: 0,
        vi_iterations: 0,
        seconds: 0.0,
        error: None,
    };
    let run = || -> Result<(usize, usize, usize, f64), ModelError> {
        let model = TransitionModel::new(cfg.routes.clone(), cfg.rewards, mode)?;
        let mdp = build(model, BuildOptions::default())?;
        let states = mdp.state_count();
        let nonterminal = mdp.state_count_without_terminal();
        let pruned = prune(mdp);
        let start = Instant::now();
        let vi = value_iteration(&pruned, cfg.discount, 1e-6)?;
        Ok((
            states,
            nonterminal,
            vi.iterations,
            start.elapsed().as_secs_f64(),
        ))
    };
    match run() {
        Ok((states, nonterminal, iterations, seconds)) => {
            row.states = states;
            row.states_without_terminal = nonterminal;
            row.vi_iterations = iterations;
            row.seconds = seconds;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Builds and VI-solves every configuration in both modes. Failures are
/// recorded row-level; the suite never aborts.
pub fn bench_scalability(suite: &[ExperimentConfig]) -> Vec<BenchRow> {
    let mut rows = Vec::with_capacity(suite.len() * 2);
    for (i, cfg) in suite.iter().enumerate() {
        let label = if cfg.label.is_empty() {
            format!("config-{i}")
        } else {
            cfg.label.clone()
        };
        for mode in [Mode::Preemptible, Mode::NonPreemptible] {
            rows.push(bench_one(&label, cfg, mode));
        }
    }
    rows
}

fn pv(probs: &[f64]) -> ProbVec {
    ProbVec::from_floats(probs).unwrap()
}

fn hard(p: ProbVec, q: ProbVec) -> RouteSpec {
    RouteSpec::new(1, RouteClass::Hard, p, 7, q).unwrap()
}

fn soft(route_id: usize) -> RouteSpec {
    RouteSpec::new(
        route_id,
        RouteClass::Soft,
        pv(&[0., 0., 1.]),
        3,
        pv(&[0., 0., 0., 0., 1.]),
    )
    .unwrap()
}

fn suite_config(label: &str, routes: Vec<RouteSpec>) -> ExperimentConfig {
    ExperimentConfig {
        label: label.to_string(),
        routes,
        rewards: RewardParams::default(),
        mode: Mode::Preemptible,
        solver: Solver::Vi,
        sampling: SamplingSpec::default(),
        trials: 1,
        traversals_per_trial: 1,
        report_stride: 1,
        seed: 0,
        discount: 0.99,
        mcts: Default::default(),
    }
}

/// The scalability suite: the baseline plus route-count, delay-support,
/// and demand-support variations.
pub fn scalability_suite() -> Vec<ExperimentConfig> {
    let q8 = pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]);
    let p3 = pv(&[0., 0., 0., 1.]);
    vec![
        suite_config("routes-1h1s", vec![hard(p3.clone(), q8.clone()), soft(2)]),
        suite_config(
            "routes-1h2s",
            vec![hard(p3.clone(), q8.clone()), soft(2), soft(3)],
        ),
        suite_config(
            "routes-1h3s",
            vec![hard(p3.clone(), q8.clone()), soft(2), soft(3), soft(4)],
        ),
        suite_config(
            "delay-p34",
            vec![hard(pv(&[0., 0., 0., 0.5, 0.5]), q8.clone()), soft(2)],
        ),
        suite_config(
            "delay-p14",
            vec![hard(pv(&[0., 0.25, 0.25, 0.25, 0.25]), q8.clone()), soft(2)],
        ),
        suite_config(
            "demand-q89",
            vec![
                hard(p3.clone(), pv(&[0., 0., 0., 0., 0., 0., 0., 0., 0.5, 0.5])),
                soft(2),
            ],
        ),
        suite_config(
            "demand-q811",
            vec![
                hard(
                    p3,
                    pv(&[0., 0., 0., 0., 0., 0., 0., 0., 0.25, 0.25, 0.25, 0.25]),
                ),
                soft(2),
            ],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_rows_report_the_expected_state_counts() {
        let suite = &scalability_suite()[..1];
        let rows = bench_scalability(suite);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mode, Mode::Preemptible);
        assert_eq!(rows[0].states, 47);
        assert_eq!(rows[1].mode, Mode::NonPreemptible);
        assert_eq!(rows[1].states, 18);
        assert!(rows.iter().all(|r| r.error.is_none() && r.seconds >= 0.0));
    }

    #[test]
    fn a_failing_config_yields_a_row_level_error_without_aborting() {
        let bad_hard = RouteSpec::new(
            1,
            RouteClass::Hard,
            pv(&[0., 0., 0., 1.]),
            3,
            pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
        )
        .unwrap();
        let twin = suite_config(
            "twin-hard",
            vec![bad_hard.clone(), {
                let mut b = bad_hard;
                b.route_id = 2;
                b
            }],
        );
        let mut suite = vec![twin];
        suite.extend(scalability_suite().into_iter().take(1));
        let rows = bench_scalability(&suite);
        assert_eq!(rows.len(), 4);
        assert!(rows[0].error.as_deref().unwrap().contains("schedulable"));
        assert!(rows[2].error.is_none());
    }

    #[test]
    fn suite_configs_all_validate() {
        for cfg in scalability_suite() {
            cfg.validate().unwrap();
        }
    }
}
