//! Cost-feasible action sets and uniform feasibility between policies.
//!
//! For a policy `π` with cost value `J^π`, an action `a` at `x` is kept when
//!
//! ```text
//! C(x,a) + β Σ_y P^a_{xy} J^π(y) <= J^π(x) + Θ(x) + EPS_FEAS
//! ```
//!
//! With `Θ ≡ 0` every policy built from the kept actions has `J^g <= J^π`
//! (the DP-inducible set `A^π`). With any `Θ >= 0` the bound weakens to
//! `J^g <= J^π + max_x Θ(x) / (1−β)`. It does not hold state by state with
//! `Θ(x)` in place of the maximum, so `Θ = (1−β)(J^{π^c} − J^π)` can admit
//! policies that are not feasible against the threshold policy.

use serde::{Deserialize, Serialize};

use crate::error::{CmdpError, Result};
use crate::evaluation::evaluate_cost;
use crate::model::{CmdpInstance, Policy, ValueFunction, EPS_FEAS};

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Per-state nonempty subsets of the admissible actions, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSetMap(Vec<Vec<usize>>);

impl ActionSetMap {
    /// Every admissible action at every state.
    pub fn full(inst: &CmdpInstance) -> Self {
        ActionSetMap((0..inst.num_states()).map(|x| (0..inst.num_actions(x)).collect()).collect())
    }

    /// Only the action `pi` takes at each state.
    pub fn singleton(pi: &Policy) -> Self {
        ActionSetMap(pi.iter().map(|&a| vec![a]).collect())
    }

    pub fn new(inst: &CmdpInstance, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        if sets.len() != inst.num_states() {
            return Err(CmdpError::InvalidArgument(format!(
                "action set map has {} states, instance has {}",
                sets.len(),
                inst.num_states()
            )));
        }
        for (x, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(CmdpError::InvalidArgument(format!("empty action set at state {x}")));
            }
            if let Some(&a) = set.iter().find(|&&a| a >= inst.num_actions(x)) {
                return Err(CmdpError::InadmissiblePolicy { state: x, action: a });
            }
        }
        Ok(ActionSetMap(sets))
    }

    pub fn num_states(&self) -> usize {
        self.0.len()
    }

    pub fn allowed(&self, x: usize) -> &[usize] {
        &self.0[x]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.0
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.0.iter().map(Vec::len).collect()
    }

    pub fn contains(&self, x: usize, a: usize) -> bool {
        self.0[x].binary_search(&a).is_ok()
    }

    /// Whether `g` belongs to the induced policy set.
    pub fn admits(&self, g: &Policy) -> bool {
        g.len() == self.0.len() && g.iter().enumerate().all(|(x, &a)| self.contains(x, a))
    }

    /// `Π_x |allowed(x)|`, saturating.
    pub fn count(&self) -> u128 {
        self.0.iter().fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    /// Replaces the subset at a single state.
    pub fn with_state(&self, x: usize, set: Vec<usize>) -> Self {
        let mut next = self.clone();
        next.0[x] = set;
        next
    }
}

/// How much slack `Θ_π` the relaxed action set may consume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlacknessMode {
    /// `Θ_π ≡ 0`
    Zero,
    /// `Θ_π(x) = (1−β)(J^{π^c}(x) − J^π(x))`
    RelativeToThreshold,
}

/// Cardinality of the induced policy set, refused above `cap`.
pub fn induced_policy_set_size(map: &ActionSetMap, cap: u64) -> Result<u64> {
    let count = map.count();
    if count > cap as u128 {
        let shown = if count == u128::MAX { "more than 2^128".to_string() } else { count.to_string() };
        return Err(CmdpError::CountTooLarge { count: shown, cap });
    }
    Ok(count as u64)
}

/// `g ∈ Φ(π)`: `J^g <= J^π + EPS_FEAS` at every state.
pub fn is_uniformly_feasible(inst: &CmdpInstance, g: &Policy, pi: &Policy) -> Result<bool> {
    let j_g = evaluate_cost(inst, g)?;
    let j_pi = evaluate_cost(inst, pi)?;
    Ok(j_g.le_within(&j_pi, EPS_FEAS))
}

/// `A^π`, the DP-inducible set.
pub fn dp_action_set(inst: &CmdpInstance, pi: &Policy) -> Result<ActionSetMap> {
    let j_pi = evaluate_cost(inst, pi)?;
    Ok(action_set_from_cost(inst, pi, &j_pi, None))
}

/// `α_π` under the given slackness mode.
pub fn alpha_action_set(inst: &CmdpInstance, pi: &Policy, mode: SlacknessMode) -> Result<ActionSetMap> {
    let j_pi = evaluate_cost(inst, pi)?;
    alpha_action_set_from_cost(inst, pi, &j_pi, mode)
}

pub fn alpha_action_set_from_cost(
    inst: &CmdpInstance,
    pi: &Policy,
    j_pi: &ValueFunction,
    mode: SlacknessMode,
) -> Result<ActionSetMap> {
    match mode {
        SlacknessMode::Zero => Ok(action_set_from_cost(inst, pi, j_pi, None)),
        SlacknessMode::RelativeToThreshold => {
            let theta = relative_slackness(inst, j_pi)?;
            Ok(action_set_from_cost(inst, pi, j_pi, Some(&theta)))
        }
    }
}

/// `Θ_π` for the given mode.
pub fn slackness(inst: &CmdpInstance, pi: &Policy, mode: SlacknessMode) -> Result<ValueFunction> {
    match mode {
        SlacknessMode::Zero => Ok(ValueFunction::zeros(inst.num_states())),
        SlacknessMode::RelativeToThreshold => relative_slackness(inst, &evaluate_cost(inst, pi)?),
    }
}

/// `(1−β)(J^{π^c} − J^π)`, failing when `π` is not feasible against `π^c`.
fn relative_slackness(inst: &CmdpInstance, j_pi: &ValueFunction) -> Result<ValueFunction> {
    let j_c = evaluate_cost(inst, inst.threshold_policy())?;
    let (state, excess) = j_pi.max_excess_over(&j_c);
    if excess > EPS_FEAS {
        return Err(CmdpError::ThresholdViolated { state, slack: (1.0 - inst.beta()) * -excess });
    }
    Ok(ValueFunction(j_c.iter().zip(j_pi.iter()).map(|(c, p)| (1.0 - inst.beta()) * (c - p)).collect()))
}

/// Kept actions for a precomputed `J^π` and optional slack. `π(x)` is always kept.
pub fn action_set_from_cost(
    inst: &CmdpInstance,
    pi: &Policy,
    j_pi: &ValueFunction,
    theta: Option<&ValueFunction>,
) -> ActionSetMap {
    let sets =
        (0..inst.num_states()).map(|x| action_subset_at(inst, x, pi[x], j_pi, theta.map_or(0.0, |t| t[x]))).collect();
    ActionSetMap(sets)
}

/// Kept actions at a single state.
pub fn action_subset_at(inst: &CmdpInstance, x: usize, current: usize, j_pi: &ValueFunction, theta: f64) -> Vec<usize> {
    let bound = j_pi[x] + theta + EPS_FEAS;
    // U_π(J^π) = J^π, so the current action qualifies up to solve round-off.
    (0..inst.num_actions(x)).filter(|&a| a == current || inst.cost_backup(x, a, j_pi.as_slice()) <= bound).collect()
}
