use thiserror::Error;

use crate::solver_dist::DualAscentTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a type invariant (non-positive variance, bad probability, ...).
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation was called outside its domain.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("degenerate fusion: no sensor contributes to the fused statistic")]
    DegenerateFusion,

    #[error("no sensor observes any signal; the objective does not depend on the powers")]
    NoSignal,

    #[error("topology error: {0}")]
    Topology(String),

    #[error(
        "consensus did not converge within {iterations} rounds (max deviation {max_deviation:e})"
    )]
    ConsensusNonConvergence {
        iterations: usize,
        max_deviation: f64,
        last_state: Vec<f64>,
    },

    #[error("dual ascent did not converge within {iterations} outer iterations (last relative step {last_rel_step:e})")]
    DualAscentNonConvergence {
        iterations: usize,
        last_rel_step: f64,
        trace: Box<DualAscentTrace>,
    },

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by an iterative solver failing to converge.
    pub fn is_convergence(&self) -> bool {
        matches!(
            self,
            Error::ConsensusNonConvergence { .. } | Error::DualAscentNonConvergence { .. }
        )
    }
}
