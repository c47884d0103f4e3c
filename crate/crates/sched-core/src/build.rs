//! Reachable explicit-state MDP enumeration.
//!
//! Preemptible mode stores every reachable state. Non-preemptible mode
//! stores only unrestricted states (and the terminal state); chains of
//! restricted states are collapsed into macro-transitions carrying their
//! accumulated probability, reward, and duration.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ModelError;
use crate::model::{Action, Mode, SystemState};
use crate::transition::{TransitionModel, TransitionOutcome};

/// Transition target with the successor encoded as a state index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexedOutcome {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
    pub duration: u32,
}

/// Whether a non-preemptible state leaves the agent any choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Restricted,
    Unrestricted,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Explicit failure beats silent exhaustion.
    pub state_cap: usize,
    /// Guard against a nonterminating forced chain; cannot trigger for
    /// valid specs since completion support is finite.
    pub chain_bound: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            state_cap: 5_000_000,
            chain_bound: 10_000,
        }
    }
}

/// Enumerated MDP: states indexed in discovery order (index 0 is the
/// all-initial configuration), per-state enabled actions in canonical
/// order, and per-(state, action) outcome lists.
#[derive(Debug, Clone)]
pub struct ExplicitMdp {
    pub model: TransitionModel,
    pub states: Vec<SystemState>,
    pub actions_of: Vec<Vec<Action>>,
    /// `transitions[state][action_pos]` parallels `actions_of[state]`.
    pub transitions: Vec<Vec<Vec<IndexedOutcome>>>,
    pub terminal_index: Option<usize>,
}

impl ExplicitMdp {
    pub fn mode(&self) -> Mode {
        self.model.mode
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state_count_without_terminal(&self) -> usize {
        self.states.len() - usize::from(self.terminal_index.is_some())
    }

    pub fn state_index(&self, s: &SystemState) -> Option<usize> {
        self.states.iter().position(|x| x == s)
    }

    pub fn outcomes(&self, state: usize, action: Action) -> Option<&[IndexedOutcome]> {
        let pos = self.actions_of[state].iter().position(|&a| a == action)?;
        Some(&self.transitions[state][pos])
    }

    /// Documented JSON layout for inspection and golden tests.
    pub fn to_json_value(&self) -> serde_json::Value {
        let states: Vec<_> = self
            .states
            .iter()
            .map(|s| {
                json!({
                    "terminal": s.terminal,
                    "in_progress": s.in_progress,
                    "requests": s.requests.iter().map(|r| json!({
                        "p": r.p.to_floats(),
                        "deadline": r.deadline,
                        "q": r.q.to_floats(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let transitions: Vec<_> = self
            .transitions
            .iter()
            .enumerate()
            .map(|(si, per_action)| {
                json!({
                    "state": si,
                    "actions": self.actions_of[si].iter().zip(per_action).map(|(a, outs)| json!({
                        "action": a.to_string(),
                        "outcomes": outs,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "mode": self.model.mode,
            "rewards": self.model.rewards,
            "state_count": self.state_count(),
            "state_count_without_terminal": self.state_count_without_terminal(),
            "states": states,
            "transitions": transitions,
        })
    }
}

/// Restricted iff exactly one action is enabled. Only meaningful in
/// non-preemptible mode.
pub fn classify_state(model: &TransitionModel, s: &SystemState) -> StateKind {
    debug_assert_eq!(model.mode, Mode::NonPreemptible);
    if !s.terminal && model.enabled_actions(s).len() == 1 {
        StateKind::Restricted
    } else {
        StateKind::Unrestricted
    }
}

/// Expands the forced chain behind `(s, a)`: repeatedly applies the
/// single enabled action through restricted states until reaching an
/// unrestricted state or the terminal state, multiplying branch
/// probabilities, summing step rewards, and counting collapsed steps.
pub fn macro_successors(
    model: &TransitionModel,
    s: &SystemState,
    a: Action,
    opts: &BuildOptions,
) -> Result<Vec<TransitionOutcome>, ModelError> {
    let mut finished: Vec<TransitionOutcome> = Vec::new();
    let mut frontier = model.successors(s, a)?;
    while let Some(partial) = frontier.pop() {
        if partial.duration > opts.chain_bound {
            return Err(ModelError::ChainBound(opts.chain_bound));
        }
        if partial.next.terminal || classify_state(model, &partial.next) == StateKind::Unrestricted
        {
            match finished.iter_mut().find(|o| {
                o.next == partial.next
                    && o.reward == partial.reward
                    && o.duration == partial.duration
            }) {
                Some(existing) => existing.prob += partial.prob,
                None => finished.push(partial),
            }
            continue;
        }
        let forced = model.enabled_actions(&partial.next)[0];
        for step in model.successors(&partial.next, forced)? {
            frontier.push(TransitionOutcome {
                next: step.next,
                prob: partial.prob * step.prob,
                reward: partial.reward + step.reward,
                duration: partial.duration + step.duration,
            });
        }
    }
    // stable ordering for build determinism
    finished.sort_by(|a, b| {
        a.duration
            .cmp(&b.duration)
            .then(a.reward.partial_cmp(&b.reward).unwrap().reverse())
            .then(a.prob.partial_cmp(&b.prob).unwrap().reverse())
    });
    Ok(finished)
}

/// Breadth-first closure of the transition relation from the all-initial
/// configuration. Deterministic: identical specs yield index-identical
/// output.
pub fn build(model: TransitionModel, opts: BuildOptions) -> Result<ExplicitMdp, ModelError> {
    let initial = SystemState::initial(&model.specs);
    let mut states: Vec<SystemState> = vec![initial.clone()];
    let mut index: HashMap<SystemState, usize> = HashMap::new();
    index.insert(initial, 0);
    let mut actions_of: Vec<Vec<Action>> = Vec::new();
    let mut transitions: Vec<Vec<Vec<IndexedOutcome>>> = Vec::new();
    let mut terminal_index = None;
    let mut queue: VecDeque<usize> = VecDeque::new();
    queue.push_back(0);

    while let Some(si) = queue.pop_front() {
        let state = states[si].clone();
        let actions = model.enabled_actions(&state);
        let mut per_action = Vec::with_capacity(actions.len());
        for &a in &actions {
            let outcomes = match model.mode {
                Mode::Preemptible => model.successors(&state, a)?,
                Mode::NonPreemptible => macro_successors(&model, &state, a, &opts)?,
            };
            let mut indexed = Vec::with_capacity(outcomes.len());
            for o in outcomes {
                let next_index = match index.get(&o.next) {
                    Some(&i) => i,
                    None => {
                        let i = states.len();
                        if i >= opts.state_cap {
                            return Err(ModelError::StateExplosion(opts.state_cap));
                        }
                        index.insert(o.next.clone(), i);
                        states.push(o.next.clone());
                        queue.push_back(i);
                        i
                    }
                };
                if o.next.terminal {
                    terminal_index = Some(next_index);
                }
                indexed.push(IndexedOutcome {
                    next: next_index,
                    prob: o.prob,
                    reward: o.reward,
                    duration: o.duration,
                });
            }
            per_action.push(indexed);
        }
        actions_of.push(actions);
        transitions.push(per_action);
    }

    Ok(ExplicitMdp {
        model,
        states,
        actions_of,
        transitions,
        terminal_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RewardParams, RouteClass, RouteSpec};
    use crate::probvec::ProbVec;

    fn pv(probs: &[f64]) -> ProbVec {
        ProbVec::from_floats(probs).unwrap()
    }

    /// Baseline two-route configuration: deterministic hard (p3=1, D=7,
    /// q8=1) and deterministic soft (p2=1, D=3, q4=1).
    pub(crate) fn baseline_specs() -> Vec<RouteSpec> {
        vec![
            RouteSpec::new(
                1,
                RouteClass::Hard,
                pv(&[0., 0., 0., 1.]),
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
        ]
    }

    fn build_mode(mode: Mode) -> ExplicitMdp {
        let model = TransitionModel::new(baseline_specs(), RewardParams::default(), mode).unwrap();
        build(model, BuildOptions::default()).unwrap()
    }

    #[test]
    fn baseline_preemptible_has_47_states() {
        let mdp = build_mode(Mode::Preemptible);
        assert_eq!(mdp.state_count(), 47);
        assert_eq!(mdp.state_count_without_terminal(), 46);
    }

    #[test]
    fn baseline_nonpreemptible_has_18_states() {
        let mdp = build_mode(Mode::NonPreemptible);
        assert_eq!(mdp.state_count(), 18);
    }

    #[test]
    fn nonpreemptible_stores_no_restricted_state() {
        let mdp = build_mode(Mode::NonPreemptible);
        for s in &mdp.states {
            if !s.terminal {
                assert_eq!(classify_state(&mdp.model, s), StateKind::Unrestricted);
            }
        }
    }

    #[test]
    fn initial_state_is_unrestricted_and_started_work_is_restricted() {
        let model = TransitionModel::new(
            baseline_specs(),
            RewardParams::default(),
            Mode::NonPreemptible,
        )
        .unwrap();
        let s = SystemState::initial(&model.specs);
        assert_eq!(classify_state(&model, &s), StateKind::Unrestricted);
        let started = &model.successors(&s, Action::Work(1)).unwrap()[0].next;
        assert_eq!(classify_state(&model, started), StateKind::Restricted);
        // completion clears the lock again
        let mdp = build_mode(Mode::NonPreemptible);
        assert!(mdp.states.iter().all(|st| st.in_progress.is_none()));
    }

    #[test]
    fn deterministic_hard_macro_transition_has_duration_three() {
        let model = TransitionModel::new(
            baseline_specs(),
            RewardParams::default(),
            Mode::NonPreemptible,
        )
        .unwrap();
        let s = SystemState::initial(&model.specs);
        let out = macro_successors(&model, &s, Action::Work(1), &BuildOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].duration, 3);
        assert_eq!(out[0].prob, 1.0);
        // soft request misses its deadline once while the hard request
        // is being finished
        assert_eq!(out[0].reward, -10.0);
    }

    #[test]
    fn one_step_macro_transition_matches_plain_successors() {
        let model = TransitionModel::new(
            baseline_specs(),
            RewardParams::default(),
            Mode::NonPreemptible,
        )
        .unwrap();
        let s = SystemState::initial(&model.specs);
        let direct = model.successors(&s, Action::Idle).unwrap();
        let collapsed =
            macro_successors(&model, &s, Action::Idle, &BuildOptions::default()).unwrap();
        assert_eq!(direct, collapsed);
    }

    #[test]
    fn probability_conservation_after_abstraction() {
        for mode in [Mode::Preemptible, Mode::NonPreemptible] {
            let mdp = build_mode(mode);
            for per_action in &mdp.transitions {
                for outs in per_action {
                    let total: f64 = outs.iter().map(|o| o.prob).sum();
                    assert!((total - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn builds_are_index_identical() {
        let a = build_mode(Mode::Preemptible);
        let b = build_mode(Mode::Preemptible);
        assert_eq!(a.states, b.states);
        assert_eq!(a.transitions.len(), b.transitions.len());
        for (ta, tb) in a.transitions.iter().zip(&b.transitions) {
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn nonpreemptible_count_never_exceeds_preemptible() {
        let pe = build_mode(Mode::Preemptible);
        let npe = build_mode(Mode::NonPreemptible);
        assert!(npe.state_count() <= pe.state_count());
    }

    #[test]
    fn state_cap_is_an_explicit_failure() {
        let model =
            TransitionModel::new(baseline_specs(), RewardParams::default(), Mode::Preemptible)
                .unwrap();
        let out = build(
            model,
            BuildOptions {
                state_cap: 10,
                chain_bound: 10_000,
            },
        );
        assert!(matches!(out, Err(ModelError::StateExplosion(10))));
    }
}
