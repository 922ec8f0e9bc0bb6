//! Composite procedures built on the restricted solver.

mod algorithm_a;
mod online;
mod refinement;

pub use algorithm_a::{run_algorithm_a, AlgorithmATrace, IterationRecord, StopReason};
pub use online::{online_step, run_online, OnlineStep, OnlineStepRecord, OnlineTrace};
pub use refinement::{pi_improvement_step, run_refinement_loop, RefinementKind, RefinementOutcome};

use crate::error::{CmdpError, Result};
use crate::evaluation::evaluate_cost;
use crate::model::{CmdpInstance, Policy, EPS_FEAS};

/// Fails with `InfeasibleStart` unless `J^start <= J^{π^c}` componentwise.
pub(crate) fn require_threshold_feasible(inst: &CmdpInstance, start: &Policy) -> Result<()> {
    inst.check_policy(start)?;
    let j = evaluate_cost(inst, start)?;
    let j_c = evaluate_cost(inst, inst.threshold_policy())?;
    let (state, excess) = j.max_excess_over(&j_c);
    if excess > EPS_FEAS {
        return Err(CmdpError::InfeasibleStart { state, excess });
    }
    Ok(())
}
