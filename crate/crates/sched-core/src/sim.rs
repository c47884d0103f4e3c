//! Trial campaigns: end-to-end pipeline orchestration and traversal
//! simulation with windowed cost reporting.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::build::{build, BuildOptions};
use crate::config::{ExperimentConfig, SamplingSpec, Solver};
use crate::error::ModelError;
use crate::learn::{estimate_system, Plant};
use crate::model::{Action, Mode, RouteSpec};
use crate::safety::{prune, PrunedMdp};
use crate::solve::{
    edf_action, mcts_action, value_iteration, MctsConfig, PolicyTable, RolloutPolicy,
};

/// Windowed cost series over a trial campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSeries {
    /// `(trial_index, running mean cost over trials 1..=trial_index)`,
    /// one row per reporting window.
    pub rows: Vec<(usize, f64)>,
    /// Undiscounted total cost of each trial.
    pub per_trial: Vec<f64>,
}

impl TrialSeries {
    pub fn final_mean(&self) -> f64 {
        self.rows.last().map(|&(_, m)| m).unwrap_or(0.0)
    }
}

/// Everything the pipeline produces before simulation starts.
pub struct Prepared {
    /// The pruned MDP policies are computed and simulated on: built
    /// from the estimated specs when learning, from the truth otherwise.
    pub pruned: PrunedMdp,
    pub estimated_specs: Option<Vec<RouteSpec>>,
    policy: PolicyKind,
    /// Traversal step guard, `10 * max(M) * W` time units.
    guard: u64,
}

enum PolicyKind {
    Table(PolicyTable),
    Edf(Vec<Option<Action>>),
    Mcts(MctsConfig),
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Builds, prunes, optionally learns, and solves per the configuration.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, ModelError> {
    cfg.validate()?;
    let specs = match cfg.sampling {
        SamplingSpec::Oracle(_) => None,
        SamplingSpec::Learn(sc) => {
            // the sampler drives the preemptible truth MDP; the plant
            // and the pruned safety map index the identical build
            let truth_pe = crate::transition::TransitionModel::new(
                cfg.routes.clone(),
                cfg.rewards,
                Mode::Preemptible,
            )?;
            let pe_pruned = prune(build(truth_pe, BuildOptions::default())?);
            let mut plant = Plant::new(
                cfg.routes.clone(),
                cfg.rewards,
                splitmix64(cfg.seed ^ 0x5A17),
            )?;
            Some(estimate_system(&mut plant, &pe_pruned, &sc)?)
        }
    };
    let solve_specs = specs.clone().unwrap_or_else(|| cfg.routes.clone());
    let model = crate::transition::TransitionModel::new(solve_specs, cfg.rewards, cfg.mode)?;
    let pruned = prune(build(model, BuildOptions::default())?);
    if !pruned.schedulable {
        return Err(ModelError::Unschedulable);
    }

    let policy = match cfg.solver {
        Solver::Vi => PolicyKind::Table(value_iteration(&pruned, cfg.discount, 1e-6)?.policy),
        Solver::Edf => {
            let per_state = (0..pruned.base.states.len())
                .map(|s| {
                    if pruned.pruned[s] {
                        None
                    } else {
                        Some(edf_action(
                            &pruned.base.model,
                            &pruned.base.states[s],
                            &pruned.safe_actions_of[s],
                        ))
                    }
                })
                .collect();
            PolicyKind::Edf(per_state)
        }
        Solver::MctsEdf => PolicyKind::Mcts(MctsConfig {
            rollout: RolloutPolicy::Edf,
            ..cfg.mcts
        }),
        Solver::MctsRandom => PolicyKind::Mcts(MctsConfig {
            rollout: RolloutPolicy::Random,
            ..cfg.mcts
        }),
    };

    let max_m = cfg
        .routes
        .iter()
        .map(|r| r.q_init.bound() as u64)
        .max()
        .unwrap();
    let guard = 10 * max_m * cfg.routes.len() as u64;
    Ok(Prepared {
        pruned,
        estimated_specs: specs,
        policy,
        guard,
    })
}

/// One trial: `traversals` back-to-back regeneration cycles from the
/// initial configuration, summing undiscounted penalties.
fn run_trial(prep: &Prepared, traversals: usize, trial_seed: u64) -> Result<f64, ModelError> {
    let pm = &prep.pruned;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let mut mcts_cache: HashMap<usize, Action> = HashMap::new();
    let mut cost = 0.0;
    let mut state = 0usize;
    for _ in 0..traversals {
        let mut elapsed: u64 = 0;
        loop {
            let action = match &prep.policy {
                PolicyKind::Table(t) => t.0[state].ok_or(ModelError::StateUnsafe)?,
                PolicyKind::Edf(t) => t[state].ok_or(ModelError::StateUnsafe)?,
                PolicyKind::Mcts(mc) => match mcts_cache.get(&state) {
                    Some(&a) => a,
                    None => {
                        let cfg = MctsConfig {
                            seed: splitmix64(trial_seed ^ state as u64),
                            ..*mc
                        };
                        let a = mcts_action(pm, state, &cfg)?;
                        mcts_cache.insert(state, a);
                        a
                    }
                },
            };
            let outs = pm.safe_outcomes(state, action)?;
            let mut x: f64 = rng.random();
            let mut chosen = outs.last().unwrap();
            for o in outs {
                if x < o.prob {
                    chosen = o;
                    break;
                }
                x -= o.prob;
            }
            assert!(
                !pm.base.states[chosen.next].terminal,
                "safe policy reached the terminal state"
            );
            cost += chosen.reward;
            elapsed += u64::from(chosen.duration);
            state = chosen.next;
            if state == 0 {
                break;
            }
            if elapsed > prep.guard {
                return Err(ModelError::InvalidConfig(format!(
                    "traversal exceeded the {}-step regeneration guard",
                    prep.guard
                )));
            }
        }
    }
    Ok(cost)
}

/// Executes the full pipeline and the trial campaign. Trials run
/// concurrently with per-trial derived seeds; output is deterministic
/// for a given configuration.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<TrialSeries, ModelError> {
    let prep = prepare(cfg)?;
    run_trials_prepared(&prep, cfg)
}

pub fn run_trials_prepared(
    prep: &Prepared,
    cfg: &ExperimentConfig,
) -> Result<TrialSeries, ModelError> {
    let per_trial: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(
                prep,
                cfg.traversals_per_trial,
                splitmix64(cfg.seed ^ (t as u64 + 1)),
            )
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(cfg.trials / cfg.report_stride);
    let mut acc = 0.0;
    for (i, c) in per_trial.iter().enumerate() {
        acc += c;
        let n = i + 1;
        if n % cfg.report_stride == 0 {
            rows.push((n, acc / n as f64));
        }
    }
    Ok(TrialSeries { rows, per_trial })
}

/// The six cost-reproduction experiments: VI, MCTS with EDF rollouts,
/// and MCTS with random rollouts, each in both modes, on the two-route
/// system with the stochastic hard completion time. MCTS search depth
/// and simulation counts are calibrated per experiment.
pub fn fig3_suite() -> Vec<ExperimentConfig> {
    use crate::model::{RewardParams, RouteClass};
    use crate::probvec::ProbVec;
    let pv = |p: &[f64]| ProbVec::from_floats(p).unwrap();
    let routes = vec![
        RouteSpec::new(
            1,
            RouteClass::Hard,
            pv(&[0., 0., 0., 0.5, 0.5]),
            7,
            pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
        )
        .unwrap(),
        RouteSpec::new(
            2,
            RouteClass::Soft,
            pv(&[0., 0., 1.]),
            3,
            pv(&[0., 0., 0., 0., 1.]),
        )
        .unwrap(),
    ];
    let base = ExperimentConfig {
        label: String::new(),
        routes,
        rewards: RewardParams::default(),
        mode: Mode::Preemptible,
        solver: Solver::Vi,
        sampling: SamplingSpec::default(),
        trials: 1000,
        traversals_per_trial: 10,
        report_stride: 50,
        seed: 12345,
        discount: 0.99,
        mcts: MctsConfig::default(),
    };
    let mcts = |depth, simulations| MctsConfig {
        depth,
        simulations,
        ..MctsConfig::default()
    };
    vec![
        ExperimentConfig {
            label: "pe-vi".into(),
            ..base.clone()
        },
        ExperimentConfig {
            label: "npe-vi".into(),
            mode: Mode::NonPreemptible,
            ..base.clone()
        },
        ExperimentConfig {
            label: "pe-mcts-edf".into(),
            solver: Solver::MctsEdf,
            mcts: mcts(10, 25),
            ..base.clone()
        },
        ExperimentConfig {
            label: "npe-mcts-edf".into(),
            mode: Mode::NonPreemptible,
            solver: Solver::MctsEdf,
            mcts: mcts(10, 50),
            ..base.clone()
        },
        ExperimentConfig {
            label: "pe-mcts-random".into(),
            solver: Solver::MctsRandom,
            mcts: mcts(20, 6),
            ..base.clone()
        },
        ExperimentConfig {
            label: "npe-mcts-random".into(),
            mode: Mode::NonPreemptible,
            solver: Solver::MctsRandom,
            mcts: mcts(10, 25),
            ..base
        },
    ]
}
