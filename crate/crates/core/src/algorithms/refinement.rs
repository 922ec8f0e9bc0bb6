use serde::{Deserialize, Serialize};

use super::require_threshold_feasible;
use crate::error::Result;
use crate::evaluation::{evaluate_cost, evaluate_reward};
use crate::feasibility::ActionSetMap;
use crate::model::{CmdpInstance, Policy, ValueFunction, EPS_FEAS};
use crate::restricted::greedy_policy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefinementKind {
    /// Feasible and no change in value: the iterate is unconstrained-optimal
    /// and therefore solves the constrained problem.
    GlobalOptimum,
    /// Feasible and strictly better at some state.
    StrictImprovement,
    /// Not feasible against the threshold policy; the loop keeps going.
    InfeasibleStep,
    /// Infeasible iterate with unchanged value; the loop stops without a certificate.
    Fixpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementOutcome {
    pub round: usize,
    pub kind: RefinementKind,
    /// `PI^round(π_n)`
    pub policy: Policy,
    pub before: ValueFunction,
    pub after: ValueFunction,
    pub cost_value: ValueFunction,
}

/// One unconstrained policy-improvement step on the full action sets.
pub fn pi_improvement_step(inst: &CmdpInstance, pi: &Policy) -> Result<Policy> {
    let v = evaluate_reward(inst, pi)?;
    Ok(greedy_policy(inst, &v, &ActionSetMap::full(inst)))
}

/// Applies `pi_improvement_step` repeatedly to `pi_n` and classifies every iterate.
/// Stops on `GlobalOptimum`, `Fixpoint` or after `max_rounds` rounds.
pub fn run_refinement_loop(inst: &CmdpInstance, pi_n: &Policy, max_rounds: usize) -> Result<Vec<RefinementOutcome>> {
    require_threshold_feasible(inst, pi_n)?;
    let j_c = evaluate_cost(inst, inst.threshold_policy())?;
    let full = ActionSetMap::full(inst);

    let mut outcomes = Vec::new();
    let mut prev_v = evaluate_reward(inst, pi_n)?;
    for round in 1..=max_rounds {
        let next = greedy_policy(inst, &prev_v, &full);
        let next_v = evaluate_reward(inst, &next)?;
        let next_j = evaluate_cost(inst, &next)?;
        let feasible = next_j.le_within(&j_c, EPS_FEAS);
        let unchanged = next_v.approx_eq(&prev_v, EPS_FEAS);
        let kind = match (feasible, unchanged) {
            (true, true) => RefinementKind::GlobalOptimum,
            (false, true) => RefinementKind::Fixpoint,
            (true, false) => RefinementKind::StrictImprovement,
            (false, false) => RefinementKind::InfeasibleStep,
        };
        outcomes.push(RefinementOutcome {
            round,
            kind,
            policy: next,
            before: prev_v,
            after: next_v.clone(),
            cost_value: next_j,
        });
        if unchanged {
            break;
        }
        prev_v = next_v;
    }
    Ok(outcomes)
}
