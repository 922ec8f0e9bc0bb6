//! Unconstrained MDPs restricted to an action-set map, solved by policy
//! iteration, and the max-over-induced-set operator `T_F`.

use std::collections::HashMap;

use crate::enumerate::enumerate_policies;
use crate::error::{CmdpError, Result};
use crate::evaluation::{evaluate, Criterion};
use crate::feasibility::ActionSetMap;
use crate::model::{CmdpInstance, Policy, ValueFunction};

/// Backups within this (relative) distance of the best are ties; the lowest index wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `(X, allowed, P, R)` or, with the cost criterion, `(X, allowed, P, C)`.
#[derive(Clone, Debug)]
pub struct RestrictedMdp<'a> {
    base: &'a CmdpInstance,
    allowed: ActionSetMap,
}

impl<'a> RestrictedMdp<'a> {
    pub fn new(base: &'a CmdpInstance, allowed: ActionSetMap) -> Result<Self> {
        if allowed.num_states() != base.num_states() {
            return Err(CmdpError::InvalidArgument(format!(
                "action set map covers {} states, instance has {}",
                allowed.num_states(),
                base.num_states()
            )));
        }
        for x in 0..base.num_states() {
            let set = allowed.allowed(x);
            if set.is_empty() {
                return Err(CmdpError::InvalidArgument(format!("empty action set at state {x}")));
            }
            if let Some(&a) = set.iter().find(|&&a| a >= base.num_actions(x)) {
                return Err(CmdpError::InadmissiblePolicy { state: x, action: a });
            }
        }
        Ok(RestrictedMdp { base, allowed })
    }

    pub fn base(&self) -> &CmdpInstance {
        self.base
    }

    pub fn allowed(&self) -> &ActionSetMap {
        &self.allowed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub policy: Policy,
    /// `V^policy` (reward) or `J^policy` (cost).
    pub value: ValueFunction,
    /// Number of policy evaluations performed.
    pub iterations: usize,
    /// Value of every evaluated iterate, in order.
    pub history: Vec<ValueFunction>,
}

/// Policy iteration from the lowest-index allowed policy.
pub fn solve_restricted(mdp: &RestrictedMdp<'_>, criterion: Criterion) -> Result<SolveResult> {
    let start = Policy(mdp.allowed.sets().iter().map(|s| s[0]).collect());
    solve_restricted_from(mdp, criterion, &start)
}

/// Policy iteration warm-started at `start`; entries outside the map fall back
/// to the lowest allowed action.
pub fn solve_restricted_from(mdp: &RestrictedMdp<'_>, criterion: Criterion, start: &Policy) -> Result<SolveResult> {
    let inst = mdp.base;
    let mut policy = Policy(
        (0..inst.num_states())
            .map(|x| {
                let a = start.as_slice().get(x).copied().unwrap_or(usize::MAX);
                if mdp.allowed.contains(x, a) {
                    a
                } else {
                    mdp.allowed.allowed(x)[0]
                }
            })
            .collect(),
    );
    let limit = mdp.allowed.count().saturating_add(1);
    let mut history = Vec::new();
    loop {
        let value = evaluate(inst, &policy, criterion)?;
        history.push(value.clone());
        if history.len() as u128 > limit {
            return Err(CmdpError::NonConvergence { iterations: history.len() });
        }
        let next = greedy_policy_for(inst, &value, &mdp.allowed, criterion);
        if next == policy {
            return Ok(SolveResult { policy, value, iterations: history.len(), history });
        }
        policy = next;
    }
}

/// One-step greedy reward policy over `allowed`, lowest index on ties.
pub fn greedy_policy(inst: &CmdpInstance, u: &ValueFunction, allowed: &ActionSetMap) -> Policy {
    greedy_policy_for(inst, u, allowed, Criterion::Reward)
}

/// Greedy policy that maximizes reward backups or minimizes cost backups.
pub fn greedy_policy_for(
    inst: &CmdpInstance,
    u: &ValueFunction,
    allowed: &ActionSetMap,
    criterion: Criterion,
) -> Policy {
    Policy((0..inst.num_states()).map(|x| best_action(inst, x, allowed.allowed(x), u, criterion)).collect())
}

/// Lowest-index action among the best backups at `x`.
pub fn best_action(
    inst: &CmdpInstance,
    x: usize,
    candidates: &[usize],
    u: &ValueFunction,
    criterion: Criterion,
) -> usize {
    // reward is maximized, cost is minimized: compare on a signed scale
    let sign = match criterion {
        Criterion::Reward => 1.0,
        Criterion::Cost => -1.0,
    };
    let scored: Vec<(usize, f64)> =
        candidates.iter().map(|&a| (a, sign * criterion.backup(inst, x, a, u.as_slice()))).collect();
    let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    scored.iter().filter(|s| s.1 >= best - tol).map(|s| s.0).min().expect("candidate action set is nonempty")
}

/// Value iteration on the restricted MDP, kept as a cross-check for policy
/// iteration. Returns the last iterate and its error bound
/// `δ/(1−δ)·threshold`.
pub fn value_iteration_restricted(
    mdp: &RestrictedMdp<'_>,
    criterion: Criterion,
    threshold: f64,
) -> (ValueFunction, f64) {
    let inst = mdp.base;
    let discount = criterion.discount(inst);
    let mut u = ValueFunction::zeros(inst.num_states());
    loop {
        let next = ValueFunction(
            (0..inst.num_states())
                .map(|x| {
                    let a = best_action(inst, x, mdp.allowed.allowed(x), &u, criterion);
                    criterion.backup(inst, x, a, u.as_slice())
                })
                .collect(),
        );
        let change = next.sup_distance(&u);
        u = next;
        if change < threshold {
            return (u, discount / (1.0 - discount) * threshold);
        }
    }
}

/// A function on `X × Π`, stored per policy argument.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyValueTable(HashMap<Policy, ValueFunction>);

impl PolicyValueTable {
    pub fn new() -> Self {
        PolicyValueTable(HashMap::new())
    }

    pub fn insert(&mut self, pi: Policy, u: ValueFunction) {
        self.0.insert(pi, u);
    }

    pub fn get(&self, pi: &Policy) -> Option<&ValueFunction> {
        self.0.get(pi)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Policy, &ValueFunction)> {
        self.0.iter()
    }

    /// `max over (x, π) of |self(x,π) − other(x,π)|` on the common keys.
    pub fn sup_distance(&self, other: &PolicyValueTable) -> f64 {
        self.0.iter().filter_map(|(pi, u)| other.get(pi).map(|v| u.sup_distance(v))).fold(0.0, f64::max)
    }
}

/// `T_F(u)(·, π) = max_{g ∈ F(π)} ( R(x,g(x)) + γ Σ_y P^{g(x)}_{xy} u(y,g) )`,
/// by exhaustive maximization over the set induced by `inducer(π)`.
pub fn apply_tf<I>(
    inst: &CmdpInstance,
    u: &PolicyValueTable,
    pi: &Policy,
    inducer: I,
    cap: u64,
) -> Result<ValueFunction>
where
    I: Fn(&Policy) -> Result<ActionSetMap>,
{
    let induced = inducer(pi)?;
    let mut best = ValueFunction::constant(inst.num_states(), f64::NEG_INFINITY);
    for g in enumerate_policies(inst, Some(&induced), cap)? {
        let u_g =
            u.get(&g).ok_or_else(|| CmdpError::InvalidArgument(format!("u(·, {:?}) is not defined", g.as_slice())))?;
        for x in 0..inst.num_states() {
            let q = inst.reward_backup(x, g[x], u_g.as_slice());
            if q > best.0[x] {
                best.0[x] = q;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::evaluate_reward;
    use crate::feasibility::dp_action_set;
    use crate::generate::{gen_instance, GenOptions};
    use crate::model::fixtures::single_state;

    #[test]
    fn singleton_map_returns_that_policy() {
        let inst = gen_instance(&GenOptions::new(3, 3, 5)).unwrap();
        let pi = Policy(vec![1, 2, 0]);
        let mdp = RestrictedMdp::new(&inst, ActionSetMap::singleton(&pi)).unwrap();
        let res = solve_restricted(&mdp, Criterion::Reward).unwrap();
        assert_eq!(res.policy, pi);
        assert!(res.value.approx_eq(&evaluate_reward(&inst, &pi).unwrap(), 1e-12));
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn single_state_picks_higher_reward() {
        let inst = single_state(&[(1.0, 0.0), (2.0, 0.0)], 0.5, 0.5, 0);
        let mdp = RestrictedMdp::new(&inst, ActionSetMap::full(&inst)).unwrap();
        let res = solve_restricted(&mdp, Criterion::Reward).unwrap();
        assert_eq!(res.policy, Policy(vec![1]));
        assert!((res.value[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_tie_takes_lowest_index() {
        let inst = single_state(&[(3.0, 0.0), (3.0, 0.0), (1.0, 0.0)], 0.5, 0.5, 0);
        let u = ValueFunction(vec![2.0]);
        assert_eq!(greedy_policy(&inst, &u, &ActionSetMap::full(&inst)), Policy(vec![0]));
        let upper = ActionSetMap::new(&inst, vec![vec![1, 2]]).unwrap();
        assert_eq!(greedy_policy(&inst, &u, &upper), Policy(vec![1]));
    }

    #[test]
    fn greedy_at_optimum_keeps_value() {
        let inst = gen_instance(&GenOptions::new(4, 3, 8)).unwrap();
        let mdp = RestrictedMdp::new(&inst, ActionSetMap::full(&inst)).unwrap();
        let res = solve_restricted(&mdp, Criterion::Reward).unwrap();
        let g = greedy_policy(&inst, &res.value, mdp.allowed());
        assert!(evaluate_reward(&inst, &g).unwrap().approx_eq(&res.value, 1e-9));
    }

    #[test]
    fn seed_42_dp_solution_matches_enumeration() {
        let inst = gen_instance(&GenOptions::new(3, 3, 42)).unwrap();
        let allowed = dp_action_set(&inst, inst.threshold_policy()).unwrap();
        let mdp = RestrictedMdp::new(&inst, allowed.clone()).unwrap();
        let res = solve_restricted(&mdp, Criterion::Reward).unwrap();
        let mut best = ValueFunction::constant(3, f64::NEG_INFINITY);
        for g in enumerate_policies(&inst, Some(&allowed), 100).unwrap() {
            let v = evaluate_reward(&inst, &g).unwrap();
            for x in 0..3 {
                best.0[x] = best.0[x].max(v[x]);
            }
        }
        assert!(res.value.approx_eq(&best, 1e-8));
    }

    #[test]
    fn policy_iteration_is_monotone_and_matches_vi() {
        for seed in 0..30 {
            let inst = gen_instance(&GenOptions::new(5, 3, seed)).unwrap();
            for criterion in [Criterion::Reward, Criterion::Cost] {
                let mdp = RestrictedMdp::new(&inst, ActionSetMap::full(&inst)).unwrap();
                let res = solve_restricted(&mdp, criterion).unwrap();
                for w in res.history.windows(2) {
                    match criterion {
                        Criterion::Reward => assert!(w[0].le_within(&w[1], 1e-9)),
                        Criterion::Cost => assert!(w[1].le_within(&w[0], 1e-9)),
                    }
                }
                let (vi, bound) = value_iteration_restricted(&mdp, criterion, 1e-12);
                assert!(vi.approx_eq(&res.value, bound + 1e-9));
            }
        }
    }

    #[test]
    fn rejects_bad_maps() {
        let inst = gen_instance(&GenOptions::new(2, 2, 1)).unwrap();
        let short = ActionSetMap::singleton(&Policy(vec![0]));
        assert!(RestrictedMdp::new(&inst, short).is_err());
    }

    #[test]
    fn tf_examples() {
        let inst = gen_instance(&GenOptions::new(3, 2, 9)).unwrap();
        let pi = Policy(vec![1, 0, 1]);
        let v_pi = evaluate_reward(&inst, &pi).unwrap();
        let mut table = PolicyValueTable::new();
        table.insert(pi.clone(), v_pi.clone());
        let singleton = |p: &Policy| Ok(ActionSetMap::singleton(p));
        let out = apply_tf(&inst, &table, &pi, singleton, 100).unwrap();
        assert!(out.approx_eq(&v_pi, 1e-9));

        // u ≡ 0 gives the best immediate reward over F(π)
        let full = |_: &Policy| Ok(ActionSetMap::full(&inst));
        let mut zeros = PolicyValueTable::new();
        for g in enumerate_policies(&inst, None, 100).unwrap() {
            zeros.insert(g, ValueFunction::zeros(3));
        }
        let out = apply_tf(&inst, &zeros, &pi, full, 100).unwrap();
        for x in 0..3 {
            assert_eq!(out[x], inst.reward(x, 0).max(inst.reward(x, 1)));
        }
        assert!(matches!(apply_tf(&inst, &zeros, &pi, full, 4), Err(CmdpError::CountTooLarge { .. })));
        assert!(apply_tf(&inst, &PolicyValueTable::new(), &pi, full, 100).is_err());
    }
}
