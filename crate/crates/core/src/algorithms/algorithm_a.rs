use serde::{Deserialize, Serialize};

use super::require_threshold_feasible;
use crate::error::{CmdpError, Result};
use crate::evaluation::{evaluate_cost, evaluate_reward, Criterion};
use crate::feasibility::{alpha_action_set_from_cost, ActionSetMap, SlacknessMode};
use crate::model::{CmdpInstance, Policy, ValueFunction, EPS_FEAS};
use crate::restricted::{solve_restricted_from, RestrictedMdp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub policy: Policy,
    pub reward_value: ValueFunction,
    pub cost_value: ValueFunction,
    /// `α_{π_t}` computed from this record's policy.
    pub action_sets: ActionSetMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// `V`, `J` and `α` all unchanged between consecutive iterates.
    FullFixpoint,
    CapReached,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmATrace {
    pub mode: SlacknessMode,
    /// `π_1, π_2, …`; the first entry is the start policy.
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl AlgorithmATrace {
    pub fn final_record(&self) -> &IterationRecord {
        self.iterations.last().expect("trace always holds the start policy")
    }

    /// Restricted MDPs solved, one per step `π_t → π_{t+1}`.
    pub fn solves(&self) -> usize {
        self.iterations.len() - 1
    }
}

/// Repeatedly replaces `π_t` by a uniformly-optimal policy of the MDP
/// restricted to `α_{π_t}` until value, cost and action sets all stop changing,
/// or `max_iters` restricted solves have run.
///
/// In relative mode `α_{π_t}` may admit policies outside `Φ(π^c)`; an iterate
/// that lands there ends the run with `ThresholdViolated`.
pub fn run_algorithm_a(
    inst: &CmdpInstance,
    start: &Policy,
    mode: SlacknessMode,
    max_iters: usize,
) -> Result<AlgorithmATrace> {
    if max_iters == 0 {
        return Err(CmdpError::InvalidArgument("max_iters must be at least 1".into()));
    }
    require_threshold_feasible(inst, start)?;

    let mut iterations = vec![record(inst, start.clone(), mode)?];
    let stop_reason = loop {
        if iterations.len() > max_iters {
            break StopReason::CapReached;
        }
        let current = iterations.last().expect("nonempty");
        let mdp = RestrictedMdp::new(inst, current.action_sets.clone())?;
        let solved = solve_restricted_from(&mdp, Criterion::Reward, &current.policy)?;
        let next = record(inst, solved.policy, mode)?;
        let fixpoint = next.reward_value.approx_eq(&current.reward_value, EPS_FEAS)
            && next.cost_value.approx_eq(&current.cost_value, EPS_FEAS)
            && next.action_sets == current.action_sets;
        iterations.push(next);
        if fixpoint {
            break StopReason::FullFixpoint;
        }
    };
    Ok(AlgorithmATrace { mode, iterations, stop_reason })
}

fn record(inst: &CmdpInstance, policy: Policy, mode: SlacknessMode) -> Result<IterationRecord> {
    let reward_value = evaluate_reward(inst, &policy)?;
    let cost_value = evaluate_cost(inst, &policy)?;
    let action_sets = alpha_action_set_from_cost(inst, &policy, &cost_value, mode)?;
    Ok(IterationRecord { policy, reward_value, cost_value, action_sets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::enumerate_policies;
    use crate::feasibility::dp_action_set;
    use crate::generate::{gen_instance, GenOptions};
    use crate::model::fixtures::single_state;
    use crate::restricted::solve_restricted;

    #[test]
    fn singleton_sets_stop_after_one_solve() {
        let inst = single_state(&[(1.0, 1.0)], 0.5, 0.5, 0);
        let trace = run_algorithm_a(&inst, &Policy(vec![0]), SlacknessMode::Zero, 10).unwrap();
        assert_eq!(trace.stop_reason, StopReason::FullFixpoint);
        assert_eq!(trace.solves(), 1);
    }

    #[test]
    fn slack_unlocks_high_reward_action() {
        // costs 1 / 2, rewards 1 / 5, π^c = high-cost action
        let inst = single_state(&[(1.0, 1.0), (5.0, 2.0)], 0.5, 0.5, 1);
        let trace = run_algorithm_a(&inst, &Policy(vec![0]), SlacknessMode::RelativeToThreshold, 10).unwrap();
        assert_eq!(trace.stop_reason, StopReason::FullFixpoint);
        let last = trace.final_record();
        assert_eq!(last.policy, Policy(vec![1]));
        assert!((last.reward_value[0] - 10.0).abs() < 1e-12);
        assert!((last.cost_value[0] - 4.0).abs() < 1e-12);

        // without slack the low-cost start is stuck
        let trace = run_algorithm_a(&inst, &Policy(vec![0]), SlacknessMode::Zero, 10).unwrap();
        assert_eq!(trace.final_record().policy, Policy(vec![0]));
    }

    #[test]
    fn infeasible_start_rejected() {
        let inst = single_state(&[(1.0, 1.0), (5.0, 2.0)], 0.5, 0.5, 0);
        let err = run_algorithm_a(&inst, &Policy(vec![1]), SlacknessMode::Zero, 10).unwrap_err();
        assert!(matches!(err, CmdpError::InfeasibleStart { .. }));
    }

    #[test]
    fn cap_is_recorded() {
        let inst = gen_instance(&GenOptions::new(3, 3, 42)).unwrap();
        let start = inst.threshold_policy().clone();
        let full = run_algorithm_a(&inst, &start, SlacknessMode::RelativeToThreshold, 100).unwrap();
        if full.solves() > 1 {
            let capped = run_algorithm_a(&inst, &start, SlacknessMode::RelativeToThreshold, 1).unwrap();
            assert_eq!(capped.stop_reason, StopReason::CapReached);
            assert_eq!(capped.solves(), 1);
        }
    }

    // Replays the trace against brute force: each step's value dominates every
    // policy in the union of the induced sets generated so far.
    #[test]
    fn seed_42_dominates_generated_sets() {
        let inst = gen_instance(&GenOptions::new(3, 3, 42)).unwrap();
        let dp = dp_action_set(&inst, inst.threshold_policy()).unwrap();
        let start = solve_restricted(&RestrictedMdp::new(&inst, dp).unwrap(), Criterion::Reward).unwrap().policy;
        for mode in [SlacknessMode::Zero, SlacknessMode::RelativeToThreshold] {
            let trace = run_algorithm_a(&inst, &start, mode, 100).unwrap();
            assert_eq!(trace.stop_reason, StopReason::FullFixpoint);
            let mut union_best = ValueFunction::constant(3, f64::NEG_INFINITY);
            for t in 0..trace.solves() {
                for g in enumerate_policies(&inst, Some(&trace.iterations[t].action_sets), 100).unwrap() {
                    let v = evaluate_reward(&inst, &g).unwrap();
                    (0..3).for_each(|x| union_best.0[x] = union_best.0[x].max(v[x]));
                }
                let next = &trace.iterations[t + 1];
                assert!(union_best.le_within(&next.reward_value, 1e-8));
                assert!(trace.iterations[t].reward_value.le_within(&next.reward_value, EPS_FEAS));
            }
        }
    }
}
