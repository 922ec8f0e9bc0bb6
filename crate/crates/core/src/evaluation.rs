//! Exact policy evaluation and the single-policy operators `T_φ` and `U_φ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CmdpError, Result};
use crate::model::{CmdpInstance, Policy, ValueFunction};

/// Bound on `‖(I − δP_π)v − r_π‖∞` for an accepted evaluation.
pub const RESIDUAL_BOUND: f64 = 1e-9;

/// Which discounted criterion a computation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// Discounted reward `R` with factor γ, maximized.
    Reward,
    /// Discounted cost `C` with factor β, minimized.
    Cost,
}

impl Criterion {
    pub fn discount(self, inst: &CmdpInstance) -> f64 {
        match self {
            Criterion::Reward => inst.gamma(),
            Criterion::Cost => inst.beta(),
        }
    }

    pub fn stage(self, inst: &CmdpInstance, x: usize, a: usize) -> f64 {
        match self {
            Criterion::Reward => inst.reward(x, a),
            Criterion::Cost => inst.cost(x, a),
        }
    }

    pub fn backup(self, inst: &CmdpInstance, x: usize, a: usize, u: &[f64]) -> f64 {
        match self {
            Criterion::Reward => inst.reward_backup(x, a, u),
            Criterion::Cost => inst.cost_backup(x, a, u),
        }
    }
}

/// `V^π`: the unique solution of `V = R_π + γ P_π V`.
pub fn evaluate_reward(inst: &CmdpInstance, pi: &Policy) -> Result<ValueFunction> {
    evaluate(inst, pi, Criterion::Reward)
}

/// `J^π`: the unique solution of `J = C_π + β P_π J`.
pub fn evaluate_cost(inst: &CmdpInstance, pi: &Policy) -> Result<ValueFunction> {
    evaluate(inst, pi, Criterion::Cost)
}

/// Solves `(I − δP_π) v = r_π` by LU with one round of iterative refinement.
pub fn evaluate(inst: &CmdpInstance, pi: &Policy, criterion: Criterion) -> Result<ValueFunction> {
    inst.check_policy(pi)?;
    let n = inst.num_states();
    let discount = criterion.discount(inst);
    let system = DMatrix::from_fn(n, n, |x, y| {
        let p = inst.transition_row(x, pi[x])[y];
        if x == y {
            1.0 - discount * p
        } else {
            -discount * p
        }
    });
    let rhs = DVector::from_fn(n, |x, _| criterion.stage(inst, x, pi[x]));

    let lu = system.clone().lu();
    let mut v = lu.solve(&rhs).ok_or(CmdpError::SolveFailure { residual: f64::INFINITY, bound: RESIDUAL_BOUND })?;
    let mut residual = &rhs - &system * &v;
    if let Some(correction) = lu.solve(&residual) {
        let refined = &v + correction;
        let refined_residual = &rhs - &system * &refined;
        if refined_residual.amax() < residual.amax() {
            v = refined;
            residual = refined_residual;
        }
    }
    let worst = residual.amax();
    if worst.is_nan() || worst > RESIDUAL_BOUND || v.iter().any(|x| !x.is_finite()) {
        return Err(CmdpError::SolveFailure { residual: worst, bound: RESIDUAL_BOUND });
    }
    Ok(ValueFunction(v.iter().copied().collect()))
}

/// `‖(I − δP_π)v − r_π‖∞` for an arbitrary candidate `v`.
pub fn evaluation_residual(inst: &CmdpInstance, pi: &Policy, criterion: Criterion, v: &ValueFunction) -> f64 {
    let applied = apply_operator(inst, pi, criterion, v);
    applied.sup_distance(v)
}

/// `T_φ(u)(x) = R(x,φ(x)) + γ Σ_y P^{φ(x)}_{xy} u(y)`
pub fn apply_reward_operator(inst: &CmdpInstance, phi: &Policy, u: &ValueFunction) -> ValueFunction {
    apply_operator(inst, phi, Criterion::Reward, u)
}

/// `U_φ(u)(x) = C(x,φ(x)) + β Σ_y P^{φ(x)}_{xy} u(y)`
pub fn apply_cost_operator(inst: &CmdpInstance, phi: &Policy, u: &ValueFunction) -> ValueFunction {
    apply_operator(inst, phi, Criterion::Cost, u)
}

pub fn apply_operator(inst: &CmdpInstance, phi: &Policy, criterion: Criterion, u: &ValueFunction) -> ValueFunction {
    debug_assert_eq!(phi.len(), inst.num_states());
    ValueFunction((0..inst.num_states()).map(|x| criterion.backup(inst, x, phi[x], u.as_slice())).collect())
}

/// Evaluates `π` by applying its operator from zero until successive iterates
/// differ by less than `tol` in sup norm. Independent of the linear solve.
pub fn evaluate_by_iteration(
    inst: &CmdpInstance,
    pi: &Policy,
    criterion: Criterion,
    tol: f64,
) -> Result<ValueFunction> {
    inst.check_policy(pi)?;
    let mut u = ValueFunction::zeros(inst.num_states());
    // δ^k ‖r‖/(1−δ) < tol is reached long before this for any δ < 1 − 1e-6
    for _ in 0..50_000_000 {
        let next = apply_operator(inst, pi, criterion, &u);
        let change = next.sup_distance(&u);
        u = next;
        if change < tol {
            return Ok(u);
        }
    }
    Err(CmdpError::SolveFailure { residual: f64::NAN, bound: tol })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::generate::{gen_instance, GenOptions};
    use crate::model::fixtures::{chain, single_state};

    #[test]
    fn geometric_series() {
        let inst = single_state(&[(1.0, 1.0)], 0.9, 0.5, 0);
        let pi = Policy(vec![0]);
        assert!((evaluate_reward(&inst, &pi).unwrap()[0] - 10.0).abs() < 1e-12);
        assert!((evaluate_cost(&inst, &pi).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn absorbing_chain() {
        let inst = chain([0.0, 1.0], [2.0, 0.0], 0.5, 0.5);
        let pi = Policy(vec![0, 0]);
        let v = evaluate_reward(&inst, &pi).unwrap();
        assert!(v.approx_eq(&ValueFunction(vec![1.0, 2.0]), 1e-12));
        let j = evaluate_cost(&inst, &pi).unwrap();
        assert!(j.approx_eq(&ValueFunction(vec![2.0, 0.0]), 1e-12));
    }

    #[test]
    fn operator_examples() {
        let inst = single_state(&[(1.0, 1.0)], 0.9, 0.5, 0);
        let pi = Policy(vec![0]);
        assert_eq!(apply_reward_operator(&inst, &pi, &ValueFunction(vec![5.0]))[0], 5.5);
        assert_eq!(apply_cost_operator(&inst, &pi, &ValueFunction(vec![2.0]))[0], 2.0);
        assert_eq!(apply_reward_operator(&inst, &pi, &ValueFunction::zeros(1))[0], 1.0);
        assert_eq!(apply_cost_operator(&inst, &pi, &ValueFunction::zeros(1))[0], 1.0);
    }

    #[test]
    fn value_is_operator_fixed_point() {
        let inst = gen_instance(&GenOptions::new(3, 3, 42)).unwrap();
        let pi = Policy(vec![2, 0, 1]);
        let v = evaluate_reward(&inst, &pi).unwrap();
        let j = evaluate_cost(&inst, &pi).unwrap();
        assert!(apply_reward_operator(&inst, &pi, &v).approx_eq(&v, 1e-9));
        assert!(apply_cost_operator(&inst, &pi, &j).approx_eq(&j, 1e-9));
    }

    #[test]
    fn seed_42_matches_iterated_operator() {
        let inst = gen_instance(&GenOptions::new(3, 3, 42)).unwrap();
        for pi in [Policy(vec![0, 0, 0]), Policy(vec![1, 2, 0]), Policy(vec![2, 2, 2])] {
            for criterion in [Criterion::Reward, Criterion::Cost] {
                let direct = evaluate(&inst, &pi, criterion).unwrap();
                let iterated = evaluate_by_iteration(&inst, &pi, criterion, 1e-12).unwrap();
                assert!(direct.approx_eq(&iterated, 1e-6), "{pi:?} {criterion:?}");
            }
        }
    }

    #[test]
    fn rejects_inadmissible_policy() {
        let inst = single_state(&[(1.0, 1.0)], 0.9, 0.5, 0);
        assert!(matches!(evaluate_reward(&inst, &Policy(vec![1])), Err(CmdpError::InadmissiblePolicy { .. })));
    }

    fn instance_and_vectors() -> impl Strategy<Value = (u64, usize, usize, Vec<f64>, Vec<f64>, Vec<usize>)> {
        (any::<u64>(), 1usize..6, 1usize..4).prop_flat_map(|(seed, n, m)| {
            (
                Just(seed),
                Just(n),
                Just(m),
                prop::collection::vec(-50.0..50.0f64, n),
                prop::collection::vec(-50.0..50.0f64, n),
                prop::collection::vec(0..m, n),
            )
        })
    }

    proptest! {
        #[test]
        fn single_policy_operators_contract((seed, n, m, u, v, choice) in instance_and_vectors()) {
            let inst = gen_instance(&GenOptions::new(n, m, seed)).unwrap();
            let phi = Policy(choice);
            let (u, v) = (ValueFunction(u), ValueFunction(v));
            let d = u.sup_distance(&v);
            let tu = apply_reward_operator(&inst, &phi, &u);
            let tv = apply_reward_operator(&inst, &phi, &v);
            prop_assert!(tu.sup_distance(&tv) <= inst.gamma() * d + 1e-12);
            let cu = apply_cost_operator(&inst, &phi, &u);
            let cv = apply_cost_operator(&inst, &phi, &v);
            prop_assert!(cu.sup_distance(&cv) <= inst.beta() * d + 1e-12);
        }

        #[test]
        fn residual_and_iteration_agree(seed in any::<u64>(), n in 1usize..7, m in 1usize..4, pick in any::<u64>()) {
            let inst = gen_instance(&GenOptions::new(n, m, seed)).unwrap();
            let pi = Policy((0..n).map(|x| ((pick >> (2 * x)) as usize) % m).collect());
            for criterion in [Criterion::Reward, Criterion::Cost] {
                let v = evaluate(&inst, &pi, criterion).unwrap();
                prop_assert!(evaluation_residual(&inst, &pi, criterion, &v) <= RESIDUAL_BOUND);
                let it = evaluate_by_iteration(&inst, &pi, criterion, 1e-12).unwrap();
                prop_assert!(v.approx_eq(&it, 1e-6));
            }
        }

        // If U_φ(J^π) <= J^π then J^φ <= J^π.
        #[test]
        fn cost_operator_monotonicity(seed in any::<u64>(), n in 1usize..6, m in 1usize..4, a in any::<u64>(), b in any::<u64>()) {
            let inst = gen_instance(&GenOptions::new(n, m, seed)).unwrap();
            let pi = Policy((0..n).map(|x| ((a >> (2 * x)) as usize) % m).collect());
            let j_pi = evaluate_cost(&inst, &pi).unwrap();
            // Start from pi and switch to b's choice only where it keeps the premise.
            let phi = Policy((0..n).map(|x| {
                let cand = ((b >> (2 * x)) as usize) % m;
                if inst.cost_backup(x, cand, j_pi.as_slice()) <= j_pi[x] { cand } else { pi[x] }
            }).collect());
            prop_assert!(apply_cost_operator(&inst, &phi, &j_pi).le_within(&j_pi, 1e-12));
            let j_phi = evaluate_cost(&inst, &phi).unwrap();
            prop_assert!(j_phi.le_within(&j_pi, 1e-9));
        }
    }
}
