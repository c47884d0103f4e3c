//! Policy computation over the safe sub-MDP: exact value iteration, the
//! earliest-deadline-first heuristic, and UCT Monte Carlo tree search
//! with an EDF or random rollout policy.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::build::IndexedOutcome;
use crate::error::ModelError;
use crate::model::{Action, RouteClass, SystemState};
use crate::safety::PrunedMdp;
use crate::transition::TransitionModel;

/// Expected discounted total reward per state; 0 for pruned states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable(pub Vec<f64>);

/// Chosen safe action per state; `None` for pruned states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable(pub Vec<Option<Action>>);

impl ValueTable {
    pub fn to_json_value(&self) -> serde_json::Value {
        json!(self
            .0
            .iter()
            .enumerate()
            .map(|(i, v)| (i.to_string(), json!(v)))
            .collect::<serde_json::Map<_, _>>())
    }
}

impl PolicyTable {
    pub fn to_json_value(&self) -> serde_json::Value {
        json!(self
            .0
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|a| (i.to_string(), json!(a.to_string()))))
            .collect::<serde_json::Map<_, _>>())
    }
}

#[derive(Debug, Clone)]
pub struct ViResult {
    pub values: ValueTable,
    pub policy: PolicyTable,
    pub iterations: usize,
    /// Max residual after each sweep; nonincreasing after the first.
    pub residuals: Vec<f64>,
}

const VI_MAX_SWEEPS: usize = 5_000_000;

/// Bellman iteration restricted to safe actions. Macro-transition
/// durations enter as `discount^duration`, keeping non-preemptible
/// values consistent with their concrete expansions.
pub fn value_iteration(pm: &PrunedMdp, discount: f64, tol: f64) -> Result<ViResult, ModelError> {
    if !pm.schedulable {
        return Err(ModelError::Unschedulable);
    }
    assert!((0.0..1.0).contains(&discount) && tol > 0.0);
    let n = pm.base.states.len();
    let mut values = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut residuals = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut residual = 0.0f64;
        for s in 0..n {
            if pm.pruned[s] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for &a in &pm.safe_actions_of[s] {
                let outs = pm.base.outcomes(s, a).unwrap();
                let q = action_value(outs, &values, discount);
                if q > best {
                    best = q;
                }
            }
            next[s] = best;
            residual = residual.max((best - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        residuals.push(residual);
        if residual <= tol || iterations >= VI_MAX_SWEEPS {
            break;
        }
    }

    // greedy extraction; canonical action order breaks ties
    let mut policy = vec![None; n];
    for (s, slot) in policy.iter_mut().enumerate() {
        if pm.pruned[s] {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for &a in &pm.safe_actions_of[s] {
            let outs = pm.base.outcomes(s, a).unwrap();
            let q = action_value(outs, &values, discount);
            if q > best {
                best = q;
                *slot = Some(a);
            }
        }
    }

    Ok(ViResult {
        values: ValueTable(values),
        policy: PolicyTable(policy),
        iterations,
        residuals,
    })
}

fn action_value(outs: &[IndexedOutcome], values: &[f64], discount: f64) -> f64 {
    outs.iter()
        .map(|o| o.prob * (o.reward + discount.powi(o.duration as i32) * values[o.next]))
        .sum()
}

/// Earliest-deadline-first over the safe actions: the incomplete hard
/// request with the smallest deadline, else the incomplete soft request
/// with the smallest deadline, else idle. Ties fall to the lowest route
/// id. Deterministic.
pub fn edf_action(model: &TransitionModel, s: &SystemState, safe: &[Action]) -> Action {
    debug_assert!(!safe.is_empty());
    let mut best: Option<(RouteClass, u32, usize)> = None;
    for &a in safe {
        let Action::Work(route_id) = a else { continue };
        let req = s.request(route_id);
        if req.is_completed() {
            continue;
        }
        let class = model.specs[route_id - 1].class;
        let candidate = (class, req.deadline, route_id);
        best = match best {
            None => Some(candidate),
            Some(current) => {
                let better = match (class, current.0) {
                    (RouteClass::Hard, RouteClass::Soft) => true,
                    (RouteClass::Soft, RouteClass::Hard) => false,
                    _ => (candidate.1, candidate.2) < (current.1, current.2),
                };
                Some(if better { candidate } else { current })
            }
        };
    }
    match best {
        Some((_, _, route_id)) => Action::Work(route_id),
        None if safe.contains(&Action::Idle) => Action::Idle,
        None => safe[0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutPolicy {
    Edf,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MctsConfig {
    /// Search horizon in macro-steps (tree plus rollout).
    pub depth: u32,
    /// Simulations per decision.
    pub simulations: u32,
    /// UCT exploration constant.
    pub exploration_c: f64,
    pub rollout: RolloutPolicy,
    pub discount: f64,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            depth: 20,
            simulations: 1000,
            exploration_c: 10.0,
            rollout: RolloutPolicy::Edf,
            discount: 0.99,
            seed: 0,
        }
    }
}

struct Edge {
    action: Action,
    visits: u32,
    value_sum: f64,
    /// Child node per outcome position, allocated lazily.
    children: Vec<Option<usize>>,
}

struct Node {
    state: usize,
    visits: u32,
    untried: Vec<Action>,
    edges: Vec<Edge>,
}

struct Tree<'a> {
    pm: &'a PrunedMdp,
    cfg: MctsConfig,
    nodes: Vec<Node>,
}

impl<'a> Tree<'a> {
    fn new_node(&mut self, state: usize) -> usize {
        let mut untried = self.pm.safe_actions_of[state].clone();
        untried.reverse(); // pop() visits actions in canonical order
        self.nodes.push(Node {
            state,
            visits: 0,
            untried,
            edges: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn simulate(&mut self, node_id: usize, depth: u32, rng: &mut ChaCha8Rng) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        let state = self.nodes[node_id].state;
        let ret = if let Some(action) = self.nodes[node_id].untried.pop() {
            // expansion: first visit of this action plays the rollout
            let outs = self.pm.base.outcomes(state, action).unwrap();
            let (pos, outcome) = sample_outcome(outs, rng);
            let remaining = depth.saturating_sub(1);
            let tail = self.rollout(outcome.next, remaining, rng);
            let ret = outcome.reward + self.cfg.discount.powi(outcome.duration as i32) * tail;
            let mut children = vec![None; outs.len()];
            let child = self.new_node(outcome.next);
            children[pos] = Some(child);
            self.nodes[node_id].edges.push(Edge {
                action,
                visits: 1,
                value_sum: ret,
                children,
            });
            ret
        } else {
            let parent_visits = self.nodes[node_id].visits.max(1);
            let c = self.cfg.exploration_c;
            let mut best = f64::NEG_INFINITY;
            let mut best_edge = 0;
            for (i, e) in self.nodes[node_id].edges.iter().enumerate() {
                let mean = e.value_sum / f64::from(e.visits);
                let uct = mean + c * (f64::from(parent_visits).ln() / f64::from(e.visits)).sqrt();
                if uct > best {
                    best = uct;
                    best_edge = i;
                }
            }
            let action = self.nodes[node_id].edges[best_edge].action;
            let outs = self.pm.base.outcomes(state, action).unwrap();
            let (pos, outcome) = sample_outcome(outs, rng);
            let (next, reward, duration) = (outcome.next, outcome.reward, outcome.duration);
            let child = match self.nodes[node_id].edges[best_edge].children[pos] {
                Some(c) => c,
                None => {
                    let c = self.new_node(next);
                    self.nodes[node_id].edges[best_edge].children[pos] = Some(c);
                    c
                }
            };
            let tail = self.simulate(child, depth.saturating_sub(1), rng);
            let ret = reward + self.cfg.discount.powi(duration as i32) * tail;
            let e = &mut self.nodes[node_id].edges[best_edge];
            e.visits += 1;
            e.value_sum += ret;
            ret
        };
        self.nodes[node_id].visits += 1;
        ret
    }

    fn rollout(&self, mut state: usize, depth: u32, rng: &mut ChaCha8Rng) -> f64 {
        let mut acc = 0.0;
        let mut factor = 1.0;
        for _ in 0..depth {
            let safe = &self.pm.safe_actions_of[state];
            let action = match self.cfg.rollout {
                RolloutPolicy::Edf => {
                    edf_action(&self.pm.base.model, &self.pm.base.states[state], safe)
                }
                RolloutPolicy::Random => safe[rng.random_range(0..safe.len())],
            };
            let outs = self.pm.base.outcomes(state, action).unwrap();
            let (_, o) = sample_outcome(outs, rng);
            acc += factor * o.reward;
            factor *= self.cfg.discount.powi(o.duration as i32);
            state = o.next;
        }
        acc
    }
}

fn sample_outcome<'o>(
    outs: &'o [IndexedOutcome],
    rng: &mut ChaCha8Rng,
) -> (usize, &'o IndexedOutcome) {
    let mut x: f64 = rng.random();
    for (i, o) in outs.iter().enumerate() {
        if x < o.prob {
            return (i, o);
        }
        x -= o.prob;
    }
    (outs.len() - 1, outs.last().unwrap())
}

/// UCT search from one safe state, returning the root action with the
/// highest mean value. Deterministic given the config seed.
pub fn mcts_action(pm: &PrunedMdp, state: usize, cfg: &MctsConfig) -> Result<Action, ModelError> {
    let safe = pm.safe_actions(state)?;
    if safe.len() == 1 {
        return Ok(safe[0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tree = Tree {
        pm,
        cfg: *cfg,
        nodes: Vec::new(),
    };
    let root = tree.new_node(state);
    for _ in 0..cfg.simulations {
        tree.simulate(root, cfg.depth, &mut rng);
    }
    // highest mean; canonical order on ties via strict improvement over
    // edges laid down in canonical order
    let mut best = f64::NEG_INFINITY;
    let mut best_action = safe[0];
    for e in &tree.nodes[root].edges {
        let mean = e.value_sum / f64::from(e.visits.max(1));
        if mean > best {
            best = mean;
            best_action = e.action;
        }
    }
    Ok(best_action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::{build, BuildOptions};
    use crate::model::{Mode, RewardParams, RouteClass, RouteSpec};
    use crate::probvec::ProbVec;
    use crate::safety::prune;

    fn pv(probs: &[f64]) -> ProbVec {
        ProbVec::from_floats(probs).unwrap()
    }

    fn baseline(mode: Mode) -> PrunedMdp {
        let hard = RouteSpec::new(
            1,
            RouteClass::Hard,
            pv(&[0., 0., 0., 1.]),
            7,
            pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
        )
        .unwrap();
        let soft = RouteSpec::new(
            2,
            RouteClass::Soft,
            pv(&[0., 0., 1.]),
            3,
            pv(&[0., 0., 0., 0., 1.]),
        )
        .unwrap();
        let model = TransitionModel::new(vec![hard, soft], RewardParams::default(), mode).unwrap();
        prune(build(model, BuildOptions::default()).unwrap())
    }

    #[test]
    fn baseline_system_has_a_zero_cost_optimal_cycle() {
        // The optimal expected future reward from the initial state is
        // 0; states that idle away needed work steps are worth less.
        for mode in [Mode::Preemptible, Mode::NonPreemptible] {
            let pm = baseline(mode);
            let vi = value_iteration(&pm, 0.99, 1e-6).unwrap();
            assert!(
                vi.values.0[0].abs() < 1e-4,
                "initial value {}",
                vi.values.0[0]
            );
            // following the greedy policy never accrues cost
            let mut s = 0usize;
            for _ in 0..64 {
                let a = vi.policy.0[s].unwrap();
                let outs = pm.base.outcomes(s, a).unwrap();
                assert_eq!(outs.len(), 1);
                assert_eq!(outs[0].reward, 0.0);
                s = outs[0].next;
            }
        }
    }

    #[test]
    fn hand_evaluated_two_state_chain() {
        // s0 -> s1 with reward -10, s1 zero-reward absorbing
        let pm = baseline(Mode::Preemptible);
        let mut sub = pm.base.clone();
        sub.states.truncate(2);
        sub.actions_of = vec![vec![Action::Idle], vec![Action::Idle]];
        sub.transitions = vec![
            vec![vec![IndexedOutcome {
                next: 1,
                prob: 1.0,
                reward: -10.0,
                duration: 1,
            }]],
            vec![vec![IndexedOutcome {
                next: 1,
                prob: 1.0,
                reward: 0.0,
                duration: 1,
            }]],
        ];
        sub.terminal_index = None;
        let pm2 = prune(sub);
        let vi = value_iteration(&pm2, 0.99, 1e-9).unwrap();
        assert!((vi.values.0[0] - (-10.0)).abs() < 1e-6);
        assert!(vi.values.0[1].abs() < 1e-9);
    }

    #[test]
    fn single_absorbing_zero_reward_state_converges_immediately() {
        let pm = baseline(Mode::Preemptible);
        let mut sub = pm.base.clone();
        sub.states.truncate(1);
        sub.actions_of = vec![vec![Action::Idle]];
        sub.transitions = vec![vec![vec![IndexedOutcome {
            next: 0,
            prob: 1.0,
            reward: 0.0,
            duration: 1,
        }]]];
        sub.terminal_index = None;
        let vi = value_iteration(&prune(sub), 0.99, 1e-9).unwrap();
        assert_eq!(vi.values.0[0], 0.0);
        assert_eq!(vi.iterations, 1);
    }

    #[test]
    fn residuals_shrink_monotonically_after_first_sweep() {
        let pm = baseline(Mode::Preemptible);
        let vi = value_iteration(&pm, 0.99, 1e-6).unwrap();
        for pair in vi.residuals.windows(2).skip(1) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        assert!(*vi.residuals.last().unwrap() <= 1e-6);
    }

    #[test]
    fn scaling_both_penalties_leaves_the_policy_unchanged() {
        let pm = baseline(Mode::Preemptible);
        let a = value_iteration(&pm, 0.99, 1e-9).unwrap();
        let mut scaled = pm.clone();
        scaled.base.model.rewards = RewardParams::new(-30.0, -30_000.0).unwrap();
        for per_action in scaled.base.transitions.iter_mut() {
            for outs in per_action.iter_mut() {
                for o in outs.iter_mut() {
                    o.reward *= 3.0;
                }
            }
        }
        let b = value_iteration(&scaled, 0.99, 1e-9).unwrap();
        assert_eq!(a.policy, b.policy);
    }

    #[test]
    fn vi_refuses_unschedulable_systems() {
        let mk = |id| {
            RouteSpec::new(
                id,
                RouteClass::Hard,
                pv(&[0., 0., 0., 1.]),
                3,
                pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
            )
            .unwrap()
        };
        let model = TransitionModel::new(
            vec![mk(1), mk(2)],
            RewardParams::default(),
            Mode::Preemptible,
        )
        .unwrap();
        let pm = prune(build(model, BuildOptions::default()).unwrap());
        assert!(matches!(
            value_iteration(&pm, 0.99, 1e-6),
            Err(ModelError::Unschedulable)
        ));
    }

    #[test]
    fn edf_prefers_the_tightest_hard_deadline() {
        let h1 = RouteSpec::new(
            1,
            RouteClass::Hard,
            pv(&[0., 0., 1.]),
            5,
            pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
        )
        .unwrap();
        let h2 = RouteSpec::new(
            2,
            RouteClass::Hard,
            pv(&[0., 0., 1.]),
            3,
            pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
        )
        .unwrap();
        let model =
            TransitionModel::new(vec![h1, h2], RewardParams::default(), Mode::Preemptible).unwrap();
        let s = SystemState::initial(&model.specs);
        let safe = model.all_actions();
        assert_eq!(edf_action(&model, &s, &safe), Action::Work(2));
    }

    #[test]
    fn edf_falls_back_to_the_tightest_soft_deadline() {
        let s1 = RouteSpec::new(
            1,
            RouteClass::Soft,
            pv(&[0., 0., 1.]),
            4,
            pv(&[0., 0., 0., 0., 1.]),
        )
        .unwrap();
        let s2 =
            RouteSpec::new(2, RouteClass::Soft, pv(&[0., 0., 1.]), 2, pv(&[0., 0., 1.])).unwrap();
        let model =
            TransitionModel::new(vec![s1, s2], RewardParams::default(), Mode::Preemptible).unwrap();
        let s = SystemState::initial(&model.specs);
        assert_eq!(
            edf_action(&model, &s, &model.all_actions()),
            Action::Work(2)
        );
    }

    #[test]
    fn edf_ties_break_to_the_lowest_route_id() {
        let mk = |id| {
            RouteSpec::new(
                id,
                RouteClass::Hard,
                pv(&[0., 1., 0.]),
                2,
                pv(&[0., 0., 0., 0., 1.]),
            )
            .unwrap()
        };
        let model = TransitionModel::new(
            vec![mk(1), mk(2)],
            RewardParams::default(),
            Mode::Preemptible,
        )
        .unwrap();
        let s = SystemState::initial(&model.specs);
        assert_eq!(
            edf_action(&model, &s, &model.all_actions()),
            Action::Work(1)
        );
    }

    #[test]
    fn edf_idles_when_everything_is_complete() {
        let model = baseline(Mode::Preemptible).base.model.clone();
        let mut s = SystemState::initial(&model.specs);
        s.requests[0].p = ProbVec::completed(4);
        s.requests[1].p = ProbVec::completed(3);
        assert_eq!(edf_action(&model, &s, &model.all_actions()), Action::Idle);
    }

    #[test]
    fn mcts_with_a_single_safe_action_returns_it() {
        let pm = baseline(Mode::Preemptible);
        let forced = (0..pm.base.states.len())
            .find(|&s| !pm.pruned[s] && pm.safe_actions_of[s].len() == 1)
            .expect("baseline has deadline-forced states");
        let cfg = MctsConfig {
            simulations: 1,
            ..Default::default()
        };
        assert_eq!(
            mcts_action(&pm, forced, &cfg).unwrap(),
            pm.safe_actions_of[forced][0]
        );
    }

    #[test]
    fn mcts_is_deterministic_for_a_fixed_seed() {
        let pm = baseline(Mode::Preemptible);
        let cfg = MctsConfig {
            seed: 99,
            simulations: 200,
            ..Default::default()
        };
        let a = mcts_action(&pm, 0, &cfg).unwrap();
        let b = mcts_action(&pm, 0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mcts_refuses_unsafe_roots() {
        let pm = baseline(Mode::Preemptible);
        let term = pm.base.terminal_index.unwrap();
        let cfg = MctsConfig::default();
        assert!(matches!(
            mcts_action(&pm, term, &cfg),
            Err(ModelError::StateUnsafe)
        ));
    }

    #[test]
    fn mcts_matches_vi_argmax_on_a_small_deterministic_system() {
        let pm = baseline(Mode::Preemptible);
        let vi = value_iteration(&pm, 0.99, 1e-9).unwrap();
        let cfg = MctsConfig {
            depth: 24,
            simulations: 10_000,
            exploration_c: 10.0,
            rollout: RolloutPolicy::Edf,
            discount: 0.99,
            seed: 5,
        };
        // compare action values rather than argmax labels: several
        // actions are exactly optimal in the zero-cost system
        let discount: f64 = 0.99;
        for s in 0..pm.base.states.len() {
            if pm.pruned[s] || pm.safe_actions_of[s].len() < 2 {
                continue;
            }
            let chosen = mcts_action(&pm, s, &cfg).unwrap();
            let q = |a: Action| {
                pm.base
                    .outcomes(s, a)
                    .unwrap()
                    .iter()
                    .map(|o| {
                        o.prob * (o.reward + discount.powi(o.duration as i32) * vi.values.0[o.next])
                    })
                    .sum::<f64>()
            };
            let best: f64 = pm.safe_actions_of[s]
                .iter()
                .map(|&a| q(a))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (q(chosen) - best).abs() < 1e-6,
                "state {s}: mcts chose {chosen} with value {} vs best {best}",
                q(chosen)
            );
        }
    }
}
