//! Asynchronous on-line improvement: only the visited state is updated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::require_threshold_feasible;
use crate::error::{CmdpError, Result};
use crate::evaluation::{evaluate_cost, evaluate_reward, Criterion};
use crate::feasibility::{action_subset_at, dp_action_set, ActionSetMap};
use crate::generate::GENERATOR_NAME;
use crate::model::{CmdpInstance, Policy, ValueFunction};
use crate::restricted::best_action;

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineStep {
    pub policy: Policy,
    pub action: usize,
    pub next_state: usize,
    /// `α_{π_t}(x_t)`
    pub alpha_at_state: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineStepRecord {
    pub time: usize,
    pub state: usize,
    pub alpha_at_state: Vec<usize>,
    /// `π_{t+1}`, its reward and cost values.
    pub policy: Policy,
    pub reward_value: ValueFunction,
    pub cost_value: ValueFunction,
    pub action_taken: usize,
    pub next_state: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineTrace {
    pub seed: u64,
    pub generator: String,
    pub initial_state: usize,
    pub initial_policy: Policy,
    pub initial_reward_value: ValueFunction,
    pub initial_cost_value: ValueFunction,
    pub steps: Vec<OnlineStepRecord>,
}

impl OnlineTrace {
    pub fn final_policy(&self) -> &Policy {
        self.steps.last().map_or(&self.initial_policy, |s| &s.policy)
    }

    pub fn final_reward_value(&self) -> &ValueFunction {
        self.steps.last().map_or(&self.initial_reward_value, |s| &s.reward_value)
    }

    /// Time of the last policy change, if any.
    pub fn last_change(&self) -> Option<usize> {
        let mut prev = &self.initial_policy;
        let mut last = None;
        for s in &self.steps {
            if &s.policy != prev {
                last = Some(s.time);
            }
            prev = &s.policy;
        }
        last
    }

    /// True once every state has been visited after the last policy change,
    /// so each state has been re-examined against the final policy.
    pub fn is_stabilized(&self, num_states: usize) -> bool {
        let since = self.last_change().map_or(0, |t| t + 1);
        let mut seen = vec![false; num_states];
        for s in self.steps.iter().filter(|s| s.time >= since) {
            seen[s.state] = true;
        }
        seen.iter().all(|&v| v)
    }

    /// `α_{π_K}` for the final policy.
    pub fn terminal_action_sets(&self, inst: &CmdpInstance) -> Result<ActionSetMap> {
        dp_action_set(inst, self.final_policy())
    }
}

/// One update at the current state `x_t` followed by a sampled transition.
pub fn online_step<R: Rng + ?Sized>(inst: &CmdpInstance, pi_t: &Policy, x_t: usize, rng: &mut R) -> Result<OnlineStep> {
    inst.check_policy(pi_t)?;
    if x_t >= inst.num_states() {
        return Err(CmdpError::InvalidArgument(format!("state {x_t} out of range")));
    }
    let v = evaluate_reward(inst, pi_t)?;
    let j = evaluate_cost(inst, pi_t)?;
    Ok(step_with_values(inst, pi_t, &v, &j, x_t, rng))
}

fn step_with_values<R: Rng + ?Sized>(
    inst: &CmdpInstance,
    pi_t: &Policy,
    v: &ValueFunction,
    j: &ValueFunction,
    x_t: usize,
    rng: &mut R,
) -> OnlineStep {
    let alpha_at_state = action_subset_at(inst, x_t, pi_t[x_t], j, 0.0);
    let action = best_action(inst, x_t, &alpha_at_state, v, Criterion::Reward);
    let policy = pi_t.with_action(x_t, action);
    let next_state = sample_next(inst.transition_row(x_t, action), rng);
    OnlineStep { policy, action, next_state, alpha_at_state }
}

/// Inverse-CDF draw from a transition row.
fn sample_next<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (y, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = y;
        acc += p;
        if u < acc {
            return y;
        }
    }
    last_positive
}

/// Runs `steps` on-line updates from the instance's initial state.
pub fn run_online(inst: &CmdpInstance, pi_0: &Policy, steps: usize, seed: u64) -> Result<OnlineTrace> {
    require_threshold_feasible(inst, pi_0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = OnlineTrace {
        seed,
        generator: GENERATOR_NAME.to_string(),
        initial_state: inst.initial_state(),
        initial_policy: pi_0.clone(),
        initial_reward_value: evaluate_reward(inst, pi_0)?,
        initial_cost_value: evaluate_cost(inst, pi_0)?,
        steps: Vec::with_capacity(steps),
    };
    let mut x = inst.initial_state();
    for time in 0..steps {
        let (pi, v, j) = match trace.steps.last() {
            Some(s) => (&s.policy, &s.reward_value, &s.cost_value),
            None => (&trace.initial_policy, &trace.initial_reward_value, &trace.initial_cost_value),
        };
        let step = step_with_values(inst, pi, v, j, x, &mut rng);
        // fresh solves for π_{t+1}, even when it equals π_t
        let reward_value = evaluate_reward(inst, &step.policy)?;
        let cost_value = evaluate_cost(inst, &step.policy)?;
        trace.steps.push(OnlineStepRecord {
            time,
            state: x,
            alpha_at_state: step.alpha_at_state,
            policy: step.policy,
            reward_value,
            cost_value,
            action_taken: step.action,
            next_state: step.next_state,
        });
        x = step.next_state;
    }
    Ok(trace)
}
