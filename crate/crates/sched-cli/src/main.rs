//! Command-line front end for the scheduling pipeline.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use sched_core::build::{build, BuildOptions};
use sched_core::config::{load_config, ExperimentConfig, SamplingSpec, Solver};
use sched_core::emit::{render_bench, render_series, Format};
use sched_core::error::ModelError;
use sched_core::learn::{estimate_system, Plant, SamplingConfig};
use sched_core::model::Mode;
use sched_core::safety::prune;
use sched_core::sim::run_trials;
use sched_core::solve::{edf_action, mcts_action, value_iteration, MctsConfig, RolloutPolicy};
use sched_core::transition::TransitionModel;

#[derive(Parser)]
#[command(
    name = "sched",
    about = "Safe scheduler synthesis for stochastic hard/soft-deadline request systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON). Optional for `bench`, which
    /// falls back to the built-in scalability suite.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Override the configured solver.
    #[arg(long)]
    solver: Option<Solver>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the explicit MDP and emit it as JSON.
    Build(Common),
    /// Build, prune, and emit the pruning report.
    Prune(Common),
    /// Sample the hidden plant and emit the estimated route specs.
    Learn(Common),
    /// Build, prune, optionally learn, solve, and emit values/policy.
    Solve(Common),
    /// Run the configured trial campaign and emit the cost series.
    Simulate(Common),
    /// Run the scalability suite and emit the benchmark table.
    Bench(Common),
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "pe" | "preemptible" => Ok(Mode::Preemptible),
        "npe" | "nonpreemptible" => Ok(Mode::NonPreemptible),
        other => Err(format!("expected pe | npe, got {other:?}")),
    }
}

fn verbose() -> bool {
    std::env::var("SCHED_LOG")
        .map(|v| !v.is_empty())
        .unwrap_or(false)
}

fn progress(msg: &str) {
    if verbose() {
        eprintln!("sched: {msg}");
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, ModelError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| ModelError::InvalidConfig("--config is required".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(mode) = common.mode {
        cfg.mode = mode;
    }
    if let Some(solver) = common.solver {
        cfg.solver = solver;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_out(common: &Common, content: &str) -> Result<(), ModelError> {
    match &common.out {
        Some(path) => sched_core::emit::emit(content, path),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn format_or(common: &Common, default: Format) -> Format {
    common.format.unwrap_or(default)
}

fn build_mdp(cfg: &ExperimentConfig) -> Result<sched_core::build::ExplicitMdp, ModelError> {
    let model = TransitionModel::new(cfg.routes.clone(), cfg.rewards, cfg.mode)?;
    build(model, BuildOptions::default())
}

fn run(cli: Cli) -> Result<(), ModelError> {
    match cli.command {
        Command::Build(common) => {
            let cfg = load(&common)?;
            progress("building explicit MDP");
            let mdp = build_mdp(&cfg)?;
            progress(&format!("{} states", mdp.state_count()));
            let text = serde_json::to_string_pretty(&mdp.to_json_value())?;
            write_out(&common, &text)
        }
        Command::Prune(common) => {
            let cfg = load(&common)?;
            let pm = prune(build_mdp(&cfg)?);
            let text = serde_json::to_string_pretty(&pm.report())?;
            write_out(&common, &text)
        }
        Command::Learn(common) => {
            let cfg = load(&common)?;
            let sc = match cfg.sampling {
                SamplingSpec::Learn(sc) => sc,
                SamplingSpec::Oracle(_) => SamplingConfig::default(),
            };
            progress(&format!(
                "sampling {} observations per route and target",
                sc.samples
            ));
            let pe_model =
                TransitionModel::new(cfg.routes.clone(), cfg.rewards, Mode::Preemptible)?;
            let pe_pruned = prune(build(pe_model, BuildOptions::default())?);
            let mut plant = Plant::new(cfg.routes.clone(), cfg.rewards, cfg.seed)?;
            let estimated = estimate_system(&mut plant, &pe_pruned, &sc)?;
            let text = serde_json::to_string_pretty(&estimated)?;
            write_out(&common, &text)
        }
        Command::Solve(common) => {
            let cfg = load(&common)?;
            let pm = prune(build_mdp(&cfg)?);
            if !pm.schedulable {
                return Err(ModelError::Unschedulable);
            }
            let value = match cfg.solver {
                Solver::Vi => {
                    progress("running value iteration");
                    let vi = value_iteration(&pm, cfg.discount, 1e-6)?;
                    json!({
                        "solver": "vi",
                        "iterations": vi.iterations,
                        "values": vi.values.to_json_value(),
                        "policy": vi.policy.to_json_value(),
                    })
                }
                Solver::Edf => {
                    let policy: serde_json::Map<String, serde_json::Value> =
                        (0..pm.base.states.len())
                            .filter(|&s| !pm.pruned[s])
                            .map(|s| {
                                let a = edf_action(
                                    &pm.base.model,
                                    &pm.base.states[s],
                                    &pm.safe_actions_of[s],
                                );
                                (s.to_string(), json!(a.to_string()))
                            })
                            .collect();
                    json!({ "solver": "edf", "policy": policy })
                }
                Solver::MctsEdf | Solver::MctsRandom => {
                    let rollout = if cfg.solver == Solver::MctsEdf {
                        RolloutPolicy::Edf
                    } else {
                        RolloutPolicy::Random
                    };
                    progress("running MCTS per safe state");
                    let policy: serde_json::Map<String, serde_json::Value> =
                        (0..pm.base.states.len())
                            .filter(|&s| !pm.pruned[s])
                            .map(|s| {
                                let mc = MctsConfig {
                                    rollout,
                                    seed: cfg.seed.wrapping_add(s as u64),
                                    ..cfg.mcts
                                };
                                let a = mcts_action(&pm, s, &mc)?;
                                Ok((s.to_string(), json!(a.to_string())))
                            })
                            .collect::<Result<_, ModelError>>()?;
                    json!({ "solver": "mcts", "rollout": format!("{rollout:?}").to_lowercase(), "policy": policy })
                }
            };
            write_out(&common, &serde_json::to_string_pretty(&value)?)
        }
        Command::Simulate(common) => {
            let cfg = load(&common)?;
            progress(&format!(
                "{} trials x {} traversals",
                cfg.trials, cfg.traversals_per_trial
            ));
            let series = run_trials(&cfg)?;
            let text = render_series(&series, format_or(&common, Format::Csv))?;
            write_out(&common, &text)
        }
        Command::Bench(common) => {
            let suite = match &common.config {
                None => sched_core::bench::scalability_suite(),
                Some(_) => vec![load(&common)?],
            };
            progress(&format!(
                "benchmarking {} configs in both modes",
                suite.len()
            ));
            let rows = sched_core::bench::bench_scalability(&suite);
            let text = render_bench(&rows, format_or(&common, Format::Csv))?;
            write_out(&common, &text)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
