//! Domain types for the stochastic hard/soft-deadline scheduling model.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::probvec::ProbVec;

/// Hard requests must complete before their deadline; soft requests may
/// miss at a cost and can still be completed afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteClass {
    Hard,
    Soft,
}

/// Preemptible systems place no constraint on actions; non-preemptible
/// systems must finish a started request before switching or idling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "preemptible", alias = "pe")]
    Preemptible,
    #[serde(rename = "nonpreemptible", alias = "npe")]
    NonPreemptible,
}

/// Immutable template for all requests of one origin-destination pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteSpec {
    /// 1-based route identifier.
    pub route_id: usize,
    pub class: RouteClass,
    /// Initial completion (delay) distribution, bound `K`.
    pub p_init: ProbVec,
    /// Initial deadline `D`.
    pub d_init: u32,
    /// Initial inter-arrival (demand) distribution, bound `M`.
    pub q_init: ProbVec,
}

impl RouteSpec {
    pub fn new(
        route_id: usize,
        class: RouteClass,
        p_init: ProbVec,
        d_init: u32,
        q_init: ProbVec,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            route_id,
            class,
            p_init,
            d_init,
            q_init,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.p_init.validate().map_err(|e| {
            ModelError::InvalidRoute(format!("route {}: p_init: {e}", self.route_id))
        })?;
        self.q_init.validate().map_err(|e| {
            ModelError::InvalidRoute(format!("route {}: q_init: {e}", self.route_id))
        })?;
        if self.d_init == 0 {
            return Err(ModelError::InvalidRoute(format!(
                "route {}: initial deadline cannot be 0",
                self.route_id
            )));
        }
        if self.p_init.is_degenerate_immediate() {
            return Err(ModelError::InvalidRoute(format!(
                "route {}: initial completion time cannot be 0",
                self.route_id
            )));
        }
        if self.q_init.is_degenerate_immediate() {
            return Err(ModelError::InvalidRoute(format!(
                "route {}: initial inter-arrival time cannot be 0",
                self.route_id
            )));
        }
        let k = self.p_init.bound();
        let m = self.q_init.bound();
        let d = self.d_init as usize;
        if !(k <= d && d <= m) {
            return Err(ModelError::InvalidRoute(format!(
                "route {}: support bounds must satisfy K <= D <= M, got K={k}, D={d}, M={m}",
                self.route_id
            )));
        }
        Ok(())
    }

    /// Fresh request in this route's initial configuration.
    pub fn initial_request(&self) -> RequestState {
        RequestState {
            p: self.p_init.clone(),
            deadline: self.d_init,
            q: self.q_init.clone(),
        }
    }
}

/// Dynamic instantiation of a route: its current completion distribution,
/// remaining deadline, and inter-arrival distribution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestState {
    pub p: ProbVec,
    pub deadline: u32,
    pub q: ProbVec,
}

impl RequestState {
    /// A request is completed iff all completion mass sits at time 0.
    pub fn is_completed(&self) -> bool {
        self.p.is_point_at_zero()
    }
}

/// Full system configuration: one request per route, plus the absorbing
/// terminal flag and (non-preemptible mode only) the in-progress lock.
///
/// Equality is component-wise; the builder relies on it for state
/// deduplication. The terminal state is canonically the one with no
/// requests and `terminal = true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub requests: Vec<RequestState>,
    pub terminal: bool,
    /// 1-based route id of the request the agent must finish, if any.
    pub in_progress: Option<usize>,
}

impl SystemState {
    pub fn initial(specs: &[RouteSpec]) -> Self {
        Self {
            requests: specs.iter().map(|s| s.initial_request()).collect(),
            terminal: false,
            in_progress: None,
        }
    }

    pub fn terminal_state() -> Self {
        Self {
            requests: Vec::new(),
            terminal: true,
            in_progress: None,
        }
    }

    pub fn request(&self, route_id: usize) -> &RequestState {
        &self.requests[route_id - 1]
    }
}

/// Scheduler action: idle or work on one route's request.
///
/// Derived ordering gives the canonical action order
/// `Idle < Work(1) < ... < Work(W)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Idle,
    /// 1-based route id.
    Work(usize),
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Idle => write!(f, "idle"),
            Action::Work(r) => write!(f, "work({r})"),
        }
    }
}

/// Penalty magnitudes for missed deadlines. Both are negative, with the
/// hard penalty far below the soft one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub j_soft: f64,
    pub j_hard: f64,
}

impl RewardParams {
    pub fn new(j_soft: f64, j_hard: f64) -> Result<Self, ModelError> {
        if !(j_hard < j_soft && j_soft < 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "rewards must satisfy j_hard < j_soft < 0, got j_soft={j_soft}, j_hard={j_hard}"
            )));
        }
        Ok(Self { j_soft, j_hard })
    }
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            j_soft: -10.0,
            j_hard: -10_000.0,
        }
    }
}
