//! Problem data, policies and value vectors.
//!
//! Actions are addressed by their position in the admissible list of the
//! state they belong to, so `Policy(vec![0, 2])` means "first admissible
//! action at state 0, third admissible action at state 1". Global action
//! labels only exist in the instance file format.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{CmdpError, Result, Violation};

/// Transition rows whose mass deviates from one by at most this much are
/// renormalized; anything larger is rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Additive tolerance used by every componentwise `<=` between value vectors.
pub const EPS_FEAS: f64 = 1e-9;

/// Unvalidated instance data with state-local action indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub num_states: usize,
    /// `transitions[x][a][y]`
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    pub costs: Vec<Vec<f64>>,
    pub gamma: f64,
    pub beta: f64,
    pub threshold_policy: Vec<usize>,
    pub initial_state: usize,
}

/// A validated finite CMDP with a threshold policy and a fixed initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct CmdpInstance {
    num_states: usize,
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
    gamma: f64,
    beta: f64,
    threshold_policy: Policy,
    initial_state: usize,
}

/// Checks every invariant of `raw` and returns the instance or all violations found.
pub fn validate_instance(raw: RawInstance) -> Result<CmdpInstance, Vec<Violation>> {
    let mut violations = Vec::new();
    let n = raw.num_states;
    if n == 0 {
        violations.push(Violation::DimensionMismatch { field: "num_states".into(), detail: "must be positive".into() });
    }
    for (field, len) in [
        ("transitions", raw.transitions.len()),
        ("rewards", raw.rewards.len()),
        ("costs", raw.costs.len()),
        ("threshold_policy", raw.threshold_policy.len()),
    ] {
        if len != n {
            violations.push(Violation::DimensionMismatch {
                field: field.into(),
                detail: format!("has {len} entries for {n} states"),
            });
        }
    }
    if !violations.is_empty() {
        return Err(violations);
    }

    for (name, value) in [("gamma", raw.gamma), ("beta", raw.beta)] {
        if !(value > 0.0 && value < 1.0) {
            violations.push(Violation::DiscountOutOfRange { name: name.into(), value });
        }
    }

    let mut transitions = raw.transitions;
    for x in 0..n {
        let m = transitions[x].len();
        if m == 0 {
            violations.push(Violation::EmptyActionSet { state: x });
            continue;
        }
        if raw.rewards[x].len() != m || raw.costs[x].len() != m {
            violations.push(Violation::DimensionMismatch {
                field: "rewards/costs".into(),
                detail: format!(
                    "state {x} has {m} transition rows but {} rewards and {} costs",
                    raw.rewards[x].len(),
                    raw.costs[x].len()
                ),
            });
            continue;
        }
        for a in 0..m {
            if !raw.rewards[x][a].is_finite() {
                violations.push(Violation::NonFinite { field: "rewards".into(), state: x, action: a });
            }
            if !raw.costs[x][a].is_finite() {
                violations.push(Violation::NonFinite { field: "costs".into(), state: x, action: a });
            }
            let row = &mut transitions[x][a];
            if row.len() != n {
                violations.push(Violation::DimensionMismatch {
                    field: "transitions".into(),
                    detail: format!("row ({x}, {a}) has {} entries for {n} states", row.len()),
                });
                continue;
            }
            let mut row_ok = true;
            for (y, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    violations.push(Violation::NonFinite { field: "transitions".into(), state: x, action: a });
                    row_ok = false;
                    break;
                }
                if p < 0.0 {
                    violations.push(Violation::NegativeProbability { state: x, action: a, next: y, value: p });
                    row_ok = false;
                }
            }
            if !row_ok {
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::NonStochasticRow { state: x, action: a, sum });
            } else if (sum - 1.0).abs() > row.len() as f64 * f64::EPSILON {
                // Rows already within summation rounding are left as is so validation is idempotent.
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
    }

    for (x, &a) in raw.threshold_policy.iter().enumerate() {
        if a >= transitions[x].len() {
            violations.push(Violation::InadmissibleThresholdPolicy {
                state: x,
                detail: format!("action index {a} but only {} admissible", transitions[x].len()),
            });
        }
    }
    if raw.initial_state >= n {
        violations.push(Violation::InitialStateOutOfRange { state: raw.initial_state, num_states: n });
    }

    if !violations.is_empty() {
        return Err(violations);
    }
    Ok(CmdpInstance {
        num_states: n,
        transitions,
        rewards: raw.rewards,
        costs: raw.costs,
        gamma: raw.gamma,
        beta: raw.beta,
        threshold_policy: Policy(raw.threshold_policy),
        initial_state: raw.initial_state,
    })
}

impl CmdpInstance {
    pub fn new(raw: RawInstance) -> Result<Self> {
        validate_instance(raw).map_err(CmdpError::Validation)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// |A(x)|
    pub fn num_actions(&self, x: usize) -> usize {
        self.rewards[x].len()
    }

    pub fn transition_row(&self, x: usize, a: usize) -> &[f64] {
        &self.transitions[x][a]
    }

    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards[x][a]
    }

    pub fn cost(&self, x: usize, a: usize) -> f64 {
        self.costs[x][a]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn threshold_policy(&self) -> &Policy {
        &self.threshold_policy
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// `Σ_y P^a_{xy} u(y)`
    pub fn expected_next(&self, x: usize, a: usize, u: &[f64]) -> f64 {
        self.transitions[x][a].iter().zip(u).map(|(p, v)| p * v).sum()
    }

    /// Reward one-step backup `R(x,a) + γ Σ_y P^a_{xy} u(y)`.
    pub fn reward_backup(&self, x: usize, a: usize, u: &[f64]) -> f64 {
        self.rewards[x][a] + self.gamma * self.expected_next(x, a, u)
    }

    /// Cost one-step backup `C(x,a) + β Σ_y P^a_{xy} u(y)`.
    pub fn cost_backup(&self, x: usize, a: usize, u: &[f64]) -> f64 {
        self.costs[x][a] + self.beta * self.expected_next(x, a, u)
    }

    /// Number of deterministic stationary policies, saturating at `u128::MAX`.
    pub fn policy_count(&self) -> u128 {
        (0..self.num_states).fold(1u128, |acc, x| acc.saturating_mul(self.num_actions(x) as u128))
    }

    pub fn check_policy(&self, pi: &Policy) -> Result<()> {
        if pi.len() != self.num_states {
            return Err(CmdpError::PolicyLength { expected: self.num_states, got: pi.len() });
        }
        for (x, &a) in pi.iter().enumerate() {
            if a >= self.num_actions(x) {
                return Err(CmdpError::InadmissiblePolicy { state: x, action: a });
            }
        }
        Ok(())
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            num_states: self.num_states,
            transitions: self.transitions.clone(),
            rewards: self.rewards.clone(),
            costs: self.costs.clone(),
            gamma: self.gamma,
            beta: self.beta,
            threshold_policy: self.threshold_policy.0.clone(),
            initial_state: self.initial_state,
        }
    }

    /// Same problem with a different threshold policy.
    pub fn with_threshold_policy(&self, pi: Policy) -> Result<Self> {
        self.check_policy(&pi)?;
        Ok(CmdpInstance { threshold_policy: pi, ..self.clone() })
    }
}

/// Deterministic stationary policy, one state-local action index per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn with_action(&self, x: usize, a: usize) -> Policy {
        let mut next = self.clone();
        next.0[x] = a;
        next
    }
}

impl Index<usize> for Policy {
    type Output = usize;
    fn index(&self, x: usize) -> &usize {
        &self.0[x]
    }
}

impl From<Vec<usize>> for Policy {
    fn from(v: Vec<usize>) -> Self {
        Policy(v)
    }
}

/// A real-valued function on states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        ValueFunction(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        ValueFunction(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// `‖self − other‖∞`
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `self(x) <= other(x) + tol` at every state.
    pub fn le_within(&self, other: &ValueFunction, tol: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + tol)
    }

    /// Largest `self(x) − other(x)`, i.e. how far `self <= other` is from holding.
    pub fn max_excess_over(&self, other: &ValueFunction) -> (usize, f64) {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).enumerate().fold((0, f64::NEG_INFINITY), |best, (x, d)| {
            if d > best.1 {
                (x, d)
            } else {
                best
            }
        })
    }

    pub fn approx_eq(&self, other: &ValueFunction, tol: f64) -> bool {
        self.sup_distance(other) <= tol
    }
}

impl Index<usize> for ValueFunction {
    type Output = f64;
    fn index(&self, x: usize) -> &f64 {
        &self.0[x]
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// One state, self-loop actions with the given (reward, cost) pairs.
    pub fn single_state(actions: &[(f64, f64)], gamma: f64, beta: f64, threshold: usize) -> CmdpInstance {
        CmdpInstance::new(RawInstance {
            num_states: 1,
            transitions: vec![actions.iter().map(|_| vec![1.0]).collect()],
            rewards: vec![actions.iter().map(|a| a.0).collect()],
            costs: vec![actions.iter().map(|a| a.1).collect()],
            gamma,
            beta,
            threshold_policy: vec![threshold],
            initial_state: 0,
        })
        .unwrap()
    }

    /// s0 -> s1, s1 absorbing, one action each.
    pub fn chain(r: [f64; 2], c: [f64; 2], gamma: f64, beta: f64) -> CmdpInstance {
        CmdpInstance::new(RawInstance {
            num_states: 2,
            transitions: vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            rewards: vec![vec![r[0]], vec![r[1]]],
            costs: vec![vec![c[0]], vec![c[1]]],
            gamma,
            beta,
            threshold_policy: vec![0, 0],
            initial_state: 0,
        })
        .unwrap()
    }
}
