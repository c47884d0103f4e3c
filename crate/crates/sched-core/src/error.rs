use thiserror::Error;

/// Errors surfaced by model construction and the transition semantics.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("shift would drop nonzero mass off index 0")]
    InvalidShift,
    #[error("event certain; no non-event branch")]
    EventCertain,
    #[error("invalid route spec: {0}")]
    InvalidRoute(String),
    #[error("malformed action: route {0} out of range 1..={1}")]
    MalformedAction(usize, usize),
    #[error("state explosion: reachable states exceed cap of {0}")]
    StateExplosion(usize),
    #[error("macro-transition chain exceeded step bound {0}")]
    ChainBound(u32),
    #[error("state is unsafe (pruned)")]
    StateUnsafe,
    #[error("system is not schedulable")]
    Unschedulable,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sampling deadlock: no safe action available")]
    SamplingDeadlock,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
