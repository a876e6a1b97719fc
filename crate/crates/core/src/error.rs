use thiserror::Error;

use crate::types::AgentId;

pub type Result<T, E = MechError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechError {
    #[error("bid profile must contain at least one agent")]
    EmptyProfile,

    #[error("agent {0} appears more than once in the profile")]
    DuplicateAgent(AgentId),

    #[error("agent {0} is not part of the profile")]
    UnknownAgent(AgentId),

    #[error("bid {bid} of agent {agent} is not a finite nonnegative number")]
    InvalidBid { agent: AgentId, bid: f64 },

    #[error("replicated profile needs at least 2 agents, got {0}")]
    TooFewAgents(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "allocation of agent {agent} is not monotone in its own bid: \
         x({low}) = {low_share} > x({high}) = {high_share}"
    )]
    MonotonicityViolation {
        agent: AgentId,
        low: f64,
        high: f64,
        low_share: f64,
        high_share: f64,
    },

    #[error(
        "quadrature budget of {max_subdivisions} subintervals exhausted with bracket width {width:e} (target {target:e})"
    )]
    QuadratureBudgetExhausted {
        max_subdivisions: usize,
        width: f64,
        target: f64,
    },

    #[error("search budget exceeded: {evaluations} evaluations requested, cap is {cap}")]
    SearchBudgetExceeded { evaluations: usize, cap: usize },

    #[error("mechanism `{0}` is not registered")]
    UnknownMechanism(String),

    #[error("mechanism `{mechanism}` has no explicit payment rule")]
    MissingPaymentRule { mechanism: String },

    #[error("precondition failed: {0}")]
    Precondition(String),
}
