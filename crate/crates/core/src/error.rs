use std::fmt;

use serde::{Deserialize, Serialize};

/// A single problem found while validating instance data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    EmptyActionSet { state: usize },
    NonStochasticRow { state: usize, action: usize, sum: f64 },
    NegativeProbability { state: usize, action: usize, next: usize, value: f64 },
    NonFinite { field: String, state: usize, action: usize },
    DiscountOutOfRange { name: String, value: f64 },
    InadmissibleThresholdPolicy { state: usize, detail: String },
    InitialStateOutOfRange { state: usize, num_states: usize },
    DimensionMismatch { field: String, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyActionSet { state } => write!(f, "state {state}: empty admissible action set"),
            Violation::NonStochasticRow { state, action, sum } => {
                write!(f, "state {state}, action {action}: transition row sums to {sum}")
            }
            Violation::NegativeProbability { state, action, next, value } => {
                write!(f, "state {state}, action {action}: P[{next}] = {value} is negative")
            }
            Violation::NonFinite { field, state, action } => {
                write!(f, "state {state}, action {action}: non-finite entry in {field}")
            }
            Violation::DiscountOutOfRange { name, value } => {
                write!(f, "discount {name} = {value} is outside (0, 1)")
            }
            Violation::InadmissibleThresholdPolicy { state, detail } => {
                write!(f, "threshold policy at state {state}: {detail}")
            }
            Violation::InitialStateOutOfRange { state, num_states } => {
                write!(f, "initial state {state} is not in 0..{num_states}")
            }
            Violation::DimensionMismatch { field, detail } => write!(f, "{field}: {detail}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CmdpError {
    #[error("invalid instance: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("policy chooses inadmissible action {action} at state {state}")]
    InadmissiblePolicy { state: usize, action: usize },

    #[error("policy has {got} entries, instance has {expected} states")]
    PolicyLength { expected: usize, got: usize },

    #[error("unknown action label {label:?} at state {state}")]
    UnknownActionLabel { state: usize, label: String },

    #[error("policy evaluation failed: residual {residual:e} exceeds {bound:e}")]
    SolveFailure { residual: f64, bound: f64 },

    #[error("policy is not feasible against the threshold policy at state {state} (slack {slack:e})")]
    ThresholdViolated { state: usize, slack: f64 },

    #[error(
        "start policy is not uniformly feasible against the threshold policy at state {state} (excess {excess:e})"
    )]
    InfeasibleStart { state: usize, excess: f64 },

    #[error("induced policy set has {count} members, above the enumeration cap {cap}")]
    CountTooLarge { count: String, cap: u64 },

    #[error("policy iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("no single policy attains the per-state maxima (gap {gap:e})")]
    NoSingleAchiever { gap: f64 },

    #[error("empty A*(x) ∩ A^pi(x) at state {state}")]
    EmptyIntersection { state: usize },

    #[error("oracle check {check} disagrees by {discrepancy:e}")]
    OracleMismatch { check: String, discrepancy: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed instance document: {0}")]
    Parse(#[from] serde_json::Error),
}

impl CmdpError {
    /// Errors that can only arise from a defect in this crate, never from user input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            CmdpError::SolveFailure { .. }
                | CmdpError::NonConvergence { .. }
                | CmdpError::NoSingleAchiever { .. }
                | CmdpError::EmptyIntersection { .. }
                | CmdpError::OracleMismatch { .. }
        )
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = CmdpError> = std::result::Result<T, E>;
