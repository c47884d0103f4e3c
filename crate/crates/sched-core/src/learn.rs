//! Safe model-based learning of delay and demand distributions.
//!
//! A hidden plant is driven over the pruned MDP; the sampler works the
//! route under estimation whenever pruning allows it and records
//! completion and arrival events, never risking a hard-deadline miss.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::build::{build, BuildOptions, ExplicitMdp};
use crate::error::ModelError;
use crate::model::{Action, Mode, RewardParams, RouteClass, RouteSpec};
use crate::probvec::ProbVec;
use crate::safety::PrunedMdp;
use crate::solve::edf_action;

/// The true system under estimation. Only step-level observations are
/// visible; the underlying distributions stay hidden.
pub struct Plant {
    mdp: ExplicitMdp,
    state: usize,
    rng: ChaCha8Rng,
}

/// Events visible after one plant step.
#[derive(Debug, Clone, Default)]
pub struct Observation {
    /// Routes whose request completed this step (1-based).
    pub completed: Vec<usize>,
    /// Routes replaced by a fresh request this step (1-based).
    pub arrived: Vec<usize>,
    pub entered_terminal: bool,
}

impl Plant {
    /// Builds the plant's internal preemptible MDP from the true specs.
    pub fn new(
        specs: Vec<RouteSpec>,
        rewards: RewardParams,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let model = crate::transition::TransitionModel::new(specs, rewards, Mode::Preemptible)?;
        let mdp = build(model, BuildOptions::default())?;
        Ok(Self {
            mdp,
            state: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn route_count(&self) -> usize {
        self.mdp.model.route_count()
    }

    /// A priori knowledge: class and deadline are known, distributions
    /// are not. The declared support bounds cap recorded observations.
    pub fn route_meta(&self, route_id: usize) -> (RouteClass, u32, usize, usize) {
        let spec = &self.mdp.model.specs[route_id - 1];
        (
            spec.class,
            spec.d_init,
            spec.p_init.len(),
            spec.q_init.len(),
        )
    }

    pub fn state_index(&self) -> usize {
        self.state
    }

    pub fn reset(&mut self) {
        self.state = 0;
    }

    /// Advances one step and reports which events occurred.
    pub fn step(&mut self, action: Action) -> Result<Observation, ModelError> {
        let outs = self
            .mdp
            .outcomes(self.state, action)
            .ok_or(ModelError::MalformedAction(0, self.route_count()))?;
        let mut x: f64 = self.rng.random();
        let mut chosen = outs.last().unwrap();
        for o in outs {
            if x < o.prob {
                chosen = o;
                break;
            }
            x -= o.prob;
        }
        let before = &self.mdp.states[self.state];
        let after = &self.mdp.states[chosen.next];
        let mut obs = Observation::default();
        if after.terminal {
            obs.entered_terminal = true;
        } else {
            for (i, spec) in self.mdp.model.specs.iter().enumerate() {
                let old = &before.requests[i];
                let new = &after.requests[i];
                // a persisting deadline always sits strictly below the
                // initial one, so replacement is unambiguous
                if new.deadline == spec.d_init {
                    obs.arrived.push(i + 1);
                } else if !old.is_completed() && new.is_completed() {
                    obs.completed.push(i + 1);
                }
            }
        }
        self.state = chosen.next;
        Ok(obs)
    }
}

/// Which event stream a sampling run records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleTarget {
    Completion,
    Interarrival,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Support size `r` entering the sample-count formula.
    pub support_size: usize,
    /// Distance bound epsilon.
    pub epsilon: f64,
    /// Failure probability gamma; the estimate lands within epsilon of
    /// the truth with probability `1 - gamma`.
    pub confidence_gamma: f64,
    /// Samples per route and target.
    pub samples: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            support_size: 2,
            epsilon: 0.0607,
            confidence_gamma: 0.1,
            samples: 1000,
        }
    }
}

/// `y = r * ceil((1 / (2 eps^2)) * (ln 2r - ln gamma))`.
pub fn required_samples(
    support_size: usize,
    epsilon: f64,
    confidence_gamma: f64,
) -> Result<u64, ModelError> {
    if support_size < 1 {
        return Err(ModelError::InvalidConfig(
            "support size must be >= 1".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(ModelError::InvalidConfig(
            "epsilon must lie in (0, 1]; epsilon = 0 needs unbounded samples".into(),
        ));
    }
    if !(confidence_gamma > 0.0 && confidence_gamma < 1.0) {
        return Err(ModelError::InvalidConfig(
            "confidence gamma must lie in (0, 1)".into(),
        ));
    }
    let r = support_size as f64;
    let inner = ((2.0 * r).ln() - confidence_gamma.ln()) / (2.0 * epsilon * epsilon);
    Ok(support_size as u64 * inner.ceil() as u64)
}

/// Normalized event counters for one route and target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    pub counts: Vec<u64>,
    pub total: u64,
    /// Observations beyond the declared support bound, clamped onto it.
    pub clamped: u64,
}

impl EmpiricalDist {
    pub fn new(len: usize) -> Self {
        Self {
            counts: vec![0; len],
            total: 0,
            clamped: 0,
        }
    }

    pub fn record(&mut self, value: usize) {
        let bound = self.counts.len() - 1;
        if value > bound {
            self.clamped += 1;
            self.counts[bound] += 1;
        } else {
            self.counts[value] += 1;
        }
        self.total += 1;
    }

    /// `counts / total` as a distribution.
    pub fn estimate(&self) -> ProbVec {
        ProbVec::from_counts(&self.counts, self.total)
    }
}

const SAMPLING_STEP_GUARD_FACTOR: u64 = 100_000;

/// Drives the plant, working `route_id` whenever the pruned MDP allows
/// it and otherwise falling back to EDF over the safe actions, until
/// `n` events of the requested kind are recorded.
pub fn sample_route(
    plant: &mut Plant,
    pruned: &PrunedMdp,
    route_id: usize,
    target: SampleTarget,
    n: u64,
) -> Result<EmpiricalDist, ModelError> {
    if !pruned.schedulable {
        return Err(ModelError::Unschedulable);
    }
    assert!(n >= 1);
    let (_, _, p_len, q_len) = plant.route_meta(route_id);
    let mut dist = EmpiricalDist::new(match target {
        SampleTarget::Completion => p_len,
        SampleTarget::Interarrival => q_len,
    });
    plant.reset();
    let mut work_steps = 0usize;
    let mut steps_since_arrival = 0usize;
    let mut steps: u64 = 0;
    while dist.total < n {
        steps += 1;
        if steps > n.saturating_mul(SAMPLING_STEP_GUARD_FACTOR) {
            return Err(ModelError::InvalidConfig(format!(
                "sampling starved: {} events after {steps} steps",
                dist.total
            )));
        }
        let state_idx = plant.state_index();
        let safe = pruned.safe_actions(state_idx)?;
        if safe.is_empty() {
            return Err(ModelError::SamplingDeadlock);
        }
        let preferred = Action::Work(route_id);
        let action = if safe.contains(&preferred) {
            preferred
        } else {
            edf_action(&pruned.base.model, &pruned.base.states[state_idx], safe)
        };
        let worked_target = action == preferred
            && !pruned.base.states[state_idx]
                .request(route_id)
                .is_completed();
        let obs = plant.step(action)?;
        debug_assert!(
            !obs.entered_terminal,
            "sampling must never reach the terminal state"
        );
        if obs.entered_terminal {
            return Err(ModelError::StateUnsafe);
        }
        if worked_target {
            work_steps += 1;
        }
        steps_since_arrival += 1;
        let arrived = obs.arrived.contains(&route_id);
        if obs.completed.contains(&route_id) {
            if target == SampleTarget::Completion {
                dist.record(work_steps);
            }
            work_steps = 0;
        }
        if arrived {
            if target == SampleTarget::Interarrival {
                dist.record(steps_since_arrival);
            }
            steps_since_arrival = 0;
            // a replacement before completion censors the attempt
            work_steps = 0;
        }
    }
    Ok(dist)
}

/// Samples every route's completion and inter-arrival distribution and
/// assembles the estimated request set. Deadlines, classes, and reward
/// parameters are known a priori; only p and q are learned.
pub fn estimate_system(
    plant: &mut Plant,
    pruned: &PrunedMdp,
    cfg: &SamplingConfig,
) -> Result<Vec<RouteSpec>, ModelError> {
    let mut specs = Vec::with_capacity(plant.route_count());
    for route_id in 1..=plant.route_count() {
        let (class, d_init, _, _) = plant.route_meta(route_id);
        let p_est = sample_route(
            plant,
            pruned,
            route_id,
            SampleTarget::Completion,
            cfg.samples,
        )?;
        let q_est = sample_route(
            plant,
            pruned,
            route_id,
            SampleTarget::Interarrival,
            cfg.samples,
        )?;
        specs.push(RouteSpec::new(
            route_id,
            class,
            p_est.estimate(),
            d_init,
            q_est.estimate(),
        )?);
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build::{build, BuildOptions};
    use crate::safety::prune;
    use crate::transition::TransitionModel;

    fn pv(probs: &[f64]) -> ProbVec {
        ProbVec::from_floats(probs).unwrap()
    }

    fn baseline_specs() -> Vec<RouteSpec> {
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

    fn pruned_for(specs: &[RouteSpec]) -> PrunedMdp {
        let model =
            TransitionModel::new(specs.to_vec(), RewardParams::default(), Mode::Preemptible)
                .unwrap();
        prune(build(model, BuildOptions::default()).unwrap())
    }

    #[test]
    fn sample_count_formula_matches_the_published_regime() {
        // 1000 samples at r=2, gamma=0.1 corresponds to eps ~ 0.0607
        let y = required_samples(2, 0.0607, 0.1).unwrap();
        assert!((998..=1002).contains(&y), "y = {y}");
        assert_eq!(required_samples(2, 0.5, 0.5).unwrap(), 10);
        assert_eq!(required_samples(1, 1.0, 0.5).unwrap(), 1);
        assert!(required_samples(2, 0.0, 0.1).is_err());
    }

    #[test]
    fn empirical_estimate_is_counts_over_total() {
        let mut d = EmpiricalDist::new(4);
        for _ in 0..6 {
            d.record(3);
        }
        for _ in 0..4 {
            d.record(2);
        }
        assert_eq!(d.total, 10);
        let est = d.estimate();
        assert_eq!(est.get_f64(3), 0.6);
        assert_eq!(est.get_f64(2), 0.4);
    }

    #[test]
    fn out_of_support_observations_clamp_to_the_bound() {
        let mut d = EmpiricalDist::new(3);
        d.record(7);
        assert_eq!(d.clamped, 1);
        assert_eq!(d.counts[2], 1);
    }

    #[test]
    fn deterministic_plant_is_estimated_exactly() {
        let specs = baseline_specs();
        let pruned = pruned_for(&specs);
        let mut plant = Plant::new(specs.clone(), RewardParams::default(), 11).unwrap();
        let p = sample_route(&mut plant, &pruned, 1, SampleTarget::Completion, 40).unwrap();
        assert_eq!(p.estimate(), pv(&[0., 0., 0., 1.]));
        let q = sample_route(&mut plant, &pruned, 1, SampleTarget::Interarrival, 40).unwrap();
        assert_eq!(q.estimate(), pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]));
        let q2 = sample_route(&mut plant, &pruned, 2, SampleTarget::Interarrival, 40).unwrap();
        assert_eq!(q2.estimate(), pv(&[0., 0., 0., 0., 1.]));
    }

    #[test]
    fn estimating_a_deterministic_plant_reproduces_the_true_mdp() {
        let specs = baseline_specs();
        let pruned = pruned_for(&specs);
        let mut plant = Plant::new(specs.clone(), RewardParams::default(), 3).unwrap();
        let cfg = SamplingConfig {
            samples: 60,
            ..Default::default()
        };
        let estimated = estimate_system(&mut plant, &pruned, &cfg).unwrap();
        assert_eq!(estimated, specs);
        let truth_mdp = pruned_for(&specs).base;
        let est_mdp = pruned_for(&estimated).base;
        assert_eq!(truth_mdp.states, est_mdp.states);
    }

    #[test]
    fn stochastic_completion_estimate_lands_within_the_bound() {
        // plant truth {0, 0.5, 0.5} on a single soft route
        let soft = RouteSpec::new(
            1,
            RouteClass::Soft,
            pv(&[0., 0.5, 0.5]),
            2,
            pv(&[0., 0., 0., 0., 1.]),
        )
        .unwrap();
        let specs = vec![soft];
        let pruned = pruned_for(&specs);
        for seed in 0..5 {
            let mut plant = Plant::new(specs.clone(), RewardParams::default(), seed).unwrap();
            let est = sample_route(&mut plant, &pruned, 1, SampleTarget::Completion, 1000)
                .unwrap()
                .estimate();
            let truth = [0.0, 0.5, 0.5];
            let linf = truth
                .iter()
                .enumerate()
                .map(|(i, t)| (est.get_f64(i) - t).abs())
                .fold(0.0, f64::max);
            assert!(linf <= 0.0607, "seed {seed}: L-inf = {linf}");
        }
    }

    #[test]
    fn sampling_with_detours_never_misses_a_hard_deadline() {
        // stochastic two-route system; sampling the soft route forces
        // EDF detours onto the hard one near its deadline
        let hard = RouteSpec::new(
            1,
            RouteClass::Hard,
            pv(&[0., 0., 0., 0.5, 0.5]),
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
        let specs = vec![hard, soft];
        let pruned = pruned_for(&specs);
        let mut plant = Plant::new(specs, RewardParams::default(), 17).unwrap();
        // internal debug assertion plus the explicit error path cover
        // terminal entry; completing means the walk stayed safe
        let est = sample_route(&mut plant, &pruned, 2, SampleTarget::Completion, 500).unwrap();
        assert_eq!(est.estimate(), pv(&[0., 0., 1.]));
    }
}
