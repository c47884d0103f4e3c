//! One-step transition semantics of the scheduling MDP.
//!
//! Within a step the worked request's completion branch and every
//! route's arrival branch compose as independent products. A new arrival
//! replaces the request outright, overriding any completion progress
//! made on the same step. A hard request whose deadline expires while
//! incomplete collapses the outcome directly into the terminal state.

use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{Action, Mode, RequestState, RewardParams, RouteClass, RouteSpec, SystemState};
use crate::probvec::ProbVec;

/// One probabilistic successor of a `(state, action)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub next: SystemState,
    pub prob: f64,
    pub reward: f64,
    /// Concrete steps covered: 1 everywhere except collapsed
    /// non-preemptible macro-transitions.
    pub duration: u32,
}

/// The scheduling system's transition relation over a fixed route set.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub specs: Vec<RouteSpec>,
    pub rewards: RewardParams,
    pub mode: Mode,
}

#[derive(Clone)]
enum CompletionBranch {
    /// Idle, or the worked request untouched by any event branch.
    Keep,
    Shifted(ProbVec),
    Completed,
}

#[derive(Clone)]
struct ArrivalBranch {
    replaced: bool,
    /// Persisted inter-arrival distribution; `None` when replaced.
    q: Option<ProbVec>,
    prob: f64,
}

impl TransitionModel {
    pub fn new(
        specs: Vec<RouteSpec>,
        rewards: RewardParams,
        mode: Mode,
    ) -> Result<Self, ModelError> {
        if specs.is_empty() {
            return Err(ModelError::InvalidConfig(
                "at least one route is required".into(),
            ));
        }
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            if spec.route_id != i + 1 {
                return Err(ModelError::InvalidRoute(format!(
                    "route ids must be 1..=W in order; position {} has id {}",
                    i, spec.route_id
                )));
            }
        }
        Ok(Self {
            specs,
            rewards,
            mode,
        })
    }

    pub fn route_count(&self) -> usize {
        self.specs.len()
    }

    pub fn all_actions(&self) -> Vec<Action> {
        let mut acts = Vec::with_capacity(self.specs.len() + 1);
        acts.push(Action::Idle);
        acts.extend((1..=self.specs.len()).map(Action::Work));
        acts
    }

    /// Actions available at `s`. Preemptible mode never restricts; in
    /// non-preemptible mode an in-progress incomplete request forces its
    /// own work action. The terminal state maps every action to the
    /// self-loop, so the full set is returned.
    pub fn enabled_actions(&self, s: &SystemState) -> Vec<Action> {
        if !s.terminal && self.mode == Mode::NonPreemptible {
            if let Some(l) = s.in_progress {
                if !s.request(l).is_completed() {
                    return vec![Action::Work(l)];
                }
            }
        }
        self.all_actions()
    }

    /// Complete one-step transition relation for `(s, a)`.
    ///
    /// Outcome probabilities sum to 1.
    pub fn successors(
        &self,
        s: &SystemState,
        a: Action,
    ) -> Result<Vec<TransitionOutcome>, ModelError> {
        let w = self.specs.len();
        if let Action::Work(l) = a {
            if l == 0 || l > w {
                return Err(ModelError::MalformedAction(l, w));
            }
        }

        // Terminal absorption: self-loop at zero reward. The hard
        // penalty is charged once, on the entering transition.
        if s.terminal {
            return Ok(vec![TransitionOutcome {
                next: SystemState::terminal_state(),
                prob: 1.0,
                reward: 0.0,
                duration: 1,
            }]);
        }

        // An incomplete hard request already at deadline 0 forces the
        // terminal transition under every action.
        let expired = s.requests.iter().zip(&self.specs).any(|(req, spec)| {
            spec.class == RouteClass::Hard && req.deadline == 0 && !req.is_completed()
        });
        if expired {
            return Ok(vec![TransitionOutcome {
                next: SystemState::terminal_state(),
                prob: 1.0,
                reward: self.rewards.j_hard,
                duration: 1,
            }]);
        }

        // Working a completed request behaves exactly like Idle.
        let worked = match a {
            Action::Work(l) if !s.request(l).is_completed() => Some(l),
            _ => None,
        };

        let completion_branches = match worked {
            None => vec![(CompletionBranch::Keep, 1.0)],
            Some(l) => {
                let p = &s.request(l).p;
                let p1 = p.get(1);
                if p1.is_zero() {
                    vec![(CompletionBranch::Shifted(p.shift_decrement()?), 1.0)]
                } else if p1.is_one() {
                    vec![(CompletionBranch::Completed, 1.0)]
                } else {
                    let (nonevent, ev) = p.condition_nonevent()?;
                    let ev = ev.to_f64().unwrap();
                    vec![
                        (CompletionBranch::Completed, ev),
                        (CompletionBranch::Shifted(nonevent), 1.0 - ev),
                    ]
                }
            }
        };

        // Per-route arrival branches, independent across routes.
        let mut arrival_branches: Vec<Vec<ArrivalBranch>> = Vec::with_capacity(w);
        for req in &s.requests {
            let q1 = req.q.get(1);
            if q1.is_one() {
                arrival_branches.push(vec![ArrivalBranch {
                    replaced: true,
                    q: None,
                    prob: 1.0,
                }]);
            } else if q1.is_zero() {
                arrival_branches.push(vec![ArrivalBranch {
                    replaced: false,
                    q: Some(req.q.shift_decrement()?),
                    prob: 1.0,
                }]);
            } else {
                let (nonevent, ev) = req.q.condition_nonevent()?;
                let ev = ev.to_f64().unwrap();
                arrival_branches.push(vec![
                    ArrivalBranch {
                        replaced: true,
                        q: None,
                        prob: ev,
                    },
                    ArrivalBranch {
                        replaced: false,
                        q: Some(nonevent),
                        prob: 1.0 - ev,
                    },
                ]);
            }
        }

        // Cartesian product over the completion branch and all arrival
        // branches; outcomes landing on the same state merge.
        let mut outcomes: Vec<TransitionOutcome> = Vec::new();
        let mut arrival_choice = vec![0usize; w];
        for (completion, c_prob) in &completion_branches {
            arrival_choice.iter_mut().for_each(|c| *c = 0);
            loop {
                let mut prob = *c_prob;
                for (i, &c) in arrival_choice.iter().enumerate() {
                    prob *= arrival_branches[i][c].prob;
                }
                if prob > 0.0 {
                    let outcome = self.compose_outcome(
                        s,
                        worked,
                        completion,
                        &arrival_choice,
                        &arrival_branches,
                        prob,
                    );
                    match outcomes.iter_mut().find(|o| o.next == outcome.next) {
                        Some(existing) => {
                            debug_assert_eq!(existing.reward, outcome.reward);
                            existing.prob += outcome.prob;
                        }
                        None => outcomes.push(outcome),
                    }
                }
                // advance the mixed-radix counter
                let mut pos = 0;
                loop {
                    if pos == w {
                        break;
                    }
                    arrival_choice[pos] += 1;
                    if arrival_choice[pos] < arrival_branches[pos].len() {
                        break;
                    }
                    arrival_choice[pos] = 0;
                    pos += 1;
                }
                if pos == w {
                    break;
                }
            }
        }
        Ok(outcomes)
    }

    fn compose_outcome(
        &self,
        s: &SystemState,
        worked: Option<usize>,
        completion: &CompletionBranch,
        arrival_choice: &[usize],
        arrival_branches: &[Vec<ArrivalBranch>],
        prob: f64,
    ) -> TransitionOutcome {
        let w = self.specs.len();
        let mut requests = Vec::with_capacity(w);
        let mut worked_completed = false;
        let mut worked_replaced = false;
        let mut hard_expired = false;
        let mut soft_misses = 0u32;

        for i in 0..w {
            let route_id = i + 1;
            let req = &s.requests[i];
            let spec = &self.specs[i];
            let arrival = &arrival_branches[i][arrival_choice[i]];
            if arrival.replaced {
                if worked == Some(route_id) {
                    worked_replaced = true;
                }
                requests.push(spec.initial_request());
                continue;
            }
            let p = if worked == Some(route_id) {
                match completion {
                    CompletionBranch::Keep => req.p.clone(),
                    CompletionBranch::Shifted(p) => p.clone(),
                    CompletionBranch::Completed => {
                        worked_completed = true;
                        ProbVec::completed(req.p.len())
                    }
                }
            } else {
                req.p.clone()
            };
            let deadline = req.deadline.saturating_sub(1);
            let completed = p.is_point_at_zero();
            if deadline == 0 && !completed {
                match spec.class {
                    RouteClass::Hard => hard_expired = true,
                    // a soft miss is charged once, on the step its
                    // deadline hits 0
                    RouteClass::Soft if req.deadline == 1 => soft_misses += 1,
                    RouteClass::Soft => {}
                }
            }
            requests.push(RequestState {
                p,
                deadline,
                q: arrival.q.clone().unwrap(),
            });
        }

        if hard_expired {
            return TransitionOutcome {
                next: SystemState::terminal_state(),
                prob,
                reward: self.rewards.j_hard,
                duration: 1,
            };
        }

        let in_progress = match (self.mode, worked) {
            (Mode::NonPreemptible, Some(l)) if !worked_completed && !worked_replaced => Some(l),
            _ => None,
        };

        TransitionOutcome {
            next: SystemState {
                requests,
                terminal: false,
                in_progress,
            },
            prob,
            reward: f64::from(soft_misses) * self.rewards.j_soft,
            duration: 1,
        }
    }
}
