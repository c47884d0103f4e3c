//! Backward-reachability pruning of terminal-reaching behavior.
//!
//! Pruning is purely graph-theoretic: an action dies as soon as any of
//! its outcomes touches a pruned state with nonzero probability, and a
//! state dies once all its actions are gone. Reward magnitudes play no
//! role. The surviving sub-MDP is safe by construction.

use serde::{Deserialize, Serialize};

use crate::build::{ExplicitMdp, IndexedOutcome};
use crate::error::ModelError;
use crate::model::Action;

/// The safe sub-MDP: the base MDP plus per-state surviving actions.
#[derive(Debug, Clone)]
pub struct PrunedMdp {
    pub base: ExplicitMdp,
    /// Parallel to `base.states`; empty for pruned states.
    pub safe_actions_of: Vec<Vec<Action>>,
    pub pruned: Vec<bool>,
    /// Whether the initial state survived.
    pub schedulable: bool,
}

/// Counts emitted for inspection after pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneReport {
    pub states_total: usize,
    pub states_pruned: usize,
    pub actions_total: usize,
    pub actions_pruned: usize,
    pub schedulable: bool,
}

/// Fixpoint removal of every state and action with nonzero probability
/// of reaching the terminal state, via a worklist over a precomputed
/// reverse-transition index.
pub fn prune(base: ExplicitMdp) -> PrunedMdp {
    let n = base.states.len();
    let mut alive: Vec<Vec<bool>> = base
        .transitions
        .iter()
        .map(|per_action| vec![true; per_action.len()])
        .collect();
    let mut alive_count: Vec<usize> = alive.iter().map(|v| v.len()).collect();
    let mut pruned = vec![false; n];
    let mut worklist: Vec<usize> = Vec::new();

    // reverse index: next -> (state, action position)
    let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (si, per_action) in base.transitions.iter().enumerate() {
        for (ai, outs) in per_action.iter().enumerate() {
            for o in outs {
                if o.prob > 0.0 {
                    preds[o.next].push((si, ai));
                }
            }
        }
    }

    for si in 0..n {
        if base.states[si].terminal || alive_count[si] == 0 {
            pruned[si] = true;
            worklist.push(si);
        }
    }

    while let Some(dead) = worklist.pop() {
        for &(si, ai) in &preds[dead] {
            if alive[si][ai] {
                alive[si][ai] = false;
                alive_count[si] -= 1;
                if alive_count[si] == 0 && !pruned[si] {
                    pruned[si] = true;
                    worklist.push(si);
                }
            }
        }
    }

    let safe_actions_of: Vec<Vec<Action>> = (0..n)
        .map(|si| {
            if pruned[si] {
                Vec::new()
            } else {
                base.actions_of[si]
                    .iter()
                    .zip(&alive[si])
                    .filter(|(_, &ok)| ok)
                    .map(|(&a, _)| a)
                    .collect()
            }
        })
        .collect();

    let schedulable = !pruned[0];
    PrunedMdp {
        base,
        safe_actions_of,
        pruned,
        schedulable,
    }
}

impl PrunedMdp {
    /// Surviving actions at a safe state.
    pub fn safe_actions(&self, state: usize) -> Result<&[Action], ModelError> {
        if self.pruned[state] {
            return Err(ModelError::StateUnsafe);
        }
        Ok(&self.safe_actions_of[state])
    }

    pub fn safe_outcomes(
        &self,
        state: usize,
        action: Action,
    ) -> Result<&[IndexedOutcome], ModelError> {
        if self.pruned[state] {
            return Err(ModelError::StateUnsafe);
        }
        if !self.safe_actions_of[state].contains(&action) {
            return Err(ModelError::StateUnsafe);
        }
        self.base
            .outcomes(state, action)
            .ok_or(ModelError::StateUnsafe)
    }

    pub fn report(&self) -> PruneReport {
        let actions_total: usize = self.base.actions_of.iter().map(Vec::len).sum();
        let actions_safe: usize = self.safe_actions_of.iter().map(Vec::len).sum();
        PruneReport {
            states_total: self.base.states.len(),
            states_pruned: self.pruned.iter().filter(|&&p| p).count(),
            actions_total,
            actions_pruned: actions_total - actions_safe,
            schedulable: self.schedulable,
        }
    }

    /// The base MDP restricted to safe actions (pruned states keep
    /// their index but lose every action).
    pub fn to_restricted_mdp(&self) -> ExplicitMdp {
        let mut restricted = self.base.clone();
        for si in 0..restricted.states.len() {
            if self.pruned[si] {
                restricted.actions_of[si].clear();
                restricted.transitions[si].clear();
            } else {
                let keep: Vec<usize> = restricted.actions_of[si]
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| self.safe_actions_of[si].contains(a))
                    .map(|(i, _)| i)
                    .collect();
                restricted.actions_of[si] =
                    keep.iter().map(|&i| restricted.actions_of[si][i]).collect();
                restricted.transitions[si] = keep
                    .iter()
                    .map(|&i| restricted.transitions[si][i].clone())
                    .collect();
            }
        }
        restricted
    }
}
