//! Safe scheduler synthesis for stochastic request systems with hard and
//! soft deadlines.
//!
//! The pipeline: construct the scheduling MDP from route specifications,
//! prune terminal-reaching behavior, learn unknown delay and demand
//! distributions by safe sampling, then compute policies with value
//! iteration or Monte Carlo tree search over the safe sub-MDP.

pub mod bench;
pub mod build;
pub mod config;
pub mod emit;
pub mod error;
pub mod learn;
pub mod model;
pub mod probvec;
pub mod safety;
pub mod sim;
pub mod solve;
pub mod transition;

pub use bench::{bench_scalability, scalability_suite, BenchRow};
pub use build::{
    build, classify_state, macro_successors, BuildOptions, ExplicitMdp, IndexedOutcome,
};
pub use config::{load_config, parse_config, ExperimentConfig, SamplingSpec, Solver};
pub use emit::{emit, render_bench, render_series, Format};
pub use error::ModelError;
pub use learn::{
    estimate_system, required_samples, sample_route, EmpiricalDist, Observation, Plant,
    SampleTarget, SamplingConfig,
};
pub use model::{Action, Mode, RequestState, RewardParams, RouteClass, RouteSpec, SystemState};
pub use probvec::ProbVec;
pub use safety::{prune, PruneReport, PrunedMdp};
pub use sim::{prepare, run_trials, run_trials_prepared, Prepared, TrialSeries};
pub use solve::{
    edf_action, mcts_action, value_iteration, MctsConfig, PolicyTable, RolloutPolicy, ValueTable,
    ViResult,
};
pub use transition::{TransitionModel, TransitionOutcome};
