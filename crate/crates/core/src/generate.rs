//! Seeded random instances.
//!
//! Draw order is fixed: for each state, for each action, the reward, then the
//! cost, then the transition row. The generator is `ChaCha8Rng` seeded with
//! `seed_from_u64`, so the same seed yields the same instance on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CmdpError, Result};
use crate::evaluation::Criterion;
use crate::feasibility::ActionSetMap;
use crate::model::{CmdpInstance, Policy, RawInstance};
use crate::restricted::{solve_restricted, RestrictedMdp};

pub const GENERATOR_NAME: &str = "ChaCha8Rng";

/// Weight of the uniform distribution mixed into every row of a communicating instance.
pub const COMMUNICATING_MIX: f64 = 0.1;

/// How the generator picks `π^c`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ThresholdChoice {
    /// Unconstrained cost minimizer; `Φ(π^c)` is then the set of cost-minimal
    /// policies, usually `{π^c}` alone.
    #[default]
    CostMinimizer,
    /// One uniform action per state, drawn after all instance data.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenOptions {
    pub states: usize,
    pub actions_per_state: usize,
    pub seed: u64,
    pub communicating: bool,
    pub gamma: f64,
    pub beta: f64,
    pub threshold: ThresholdChoice,
}

impl GenOptions {
    pub fn new(states: usize, actions_per_state: usize, seed: u64) -> Self {
        GenOptions {
            states,
            actions_per_state,
            seed,
            communicating: false,
            gamma: 0.9,
            beta: 0.9,
            threshold: ThresholdChoice::CostMinimizer,
        }
    }

    pub fn communicating(mut self, yes: bool) -> Self {
        self.communicating = yes;
        self
    }

    pub fn threshold(mut self, choice: ThresholdChoice) -> Self {
        self.threshold = choice;
        self
    }
}

/// Generates an instance; `π^c` follows `opts.threshold`.
pub fn gen_instance(opts: &GenOptions) -> Result<CmdpInstance> {
    if opts.states == 0 || opts.actions_per_state == 0 {
        return Err(CmdpError::InvalidArgument(format!(
            "need at least one state and one action, got {} x {}",
            opts.states, opts.actions_per_state
        )));
    }
    let (n, m) = (opts.states, opts.actions_per_state);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut transitions = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    for _ in 0..n {
        let (mut p_x, mut r_x, mut c_x) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
        for _ in 0..m {
            r_x.push(rng.random::<f64>());
            c_x.push(rng.random::<f64>());
            let mut row = simplex_sample(&mut rng, n);
            if opts.communicating {
                for p in &mut row {
                    *p = (1.0 - COMMUNICATING_MIX) * *p + COMMUNICATING_MIX / n as f64;
                }
            }
            p_x.push(row);
        }
        transitions.push(p_x);
        rewards.push(r_x);
        costs.push(c_x);
    }
    let provisional = CmdpInstance::new(RawInstance {
        num_states: n,
        transitions,
        rewards,
        costs,
        gamma: opts.gamma,
        beta: opts.beta,
        threshold_policy: vec![0; n],
        initial_state: 0,
    })?;
    let threshold = match opts.threshold {
        ThresholdChoice::CostMinimizer => cost_minimizing_policy(&provisional)?,
        ThresholdChoice::Random => Policy((0..n).map(|_| rng.random_range(0..m)).collect()),
    };
    provisional.with_threshold_policy(threshold)
}

/// Uniformly-optimal policy of the unconstrained cost-minimizing MDP.
pub fn cost_minimizing_policy(inst: &CmdpInstance) -> Result<Policy> {
    let mdp = RestrictedMdp::new(inst, ActionSetMap::full(inst))?;
    Ok(solve_restricted(&mdp, Criterion::Cost)?.policy)
}

/// Uniform sample from the probability simplex (normalized exponentials).
fn simplex_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.into_iter().map(|e| e / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::evaluate_cost;
    use crate::oracle::enumerate_policies;

    #[test]
    fn rejects_empty_sizes() {
        assert!(gen_instance(&GenOptions::new(0, 2, 1)).is_err());
        assert!(gen_instance(&GenOptions::new(2, 0, 1)).is_err());
    }

    #[test]
    fn trivial_size() {
        let inst = gen_instance(&GenOptions::new(1, 1, 7)).unwrap();
        assert_eq!(inst.transition_row(0, 0), &[1.0]);
        assert!((0.0..1.0).contains(&inst.reward(0, 0)));
        assert!((0.0..1.0).contains(&inst.cost(0, 0)));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_instance(&GenOptions::new(4, 3, 11)).unwrap();
        let b = gen_instance(&GenOptions::new(4, 3, 11)).unwrap();
        let c = gen_instance(&GenOptions::new(4, 3, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn communicating_rows_are_positive() {
        for seed in 0..20 {
            let inst = gen_instance(&GenOptions::new(5, 3, seed).communicating(true)).unwrap();
            for x in 0..5 {
                for a in 0..3 {
                    assert!(inst.transition_row(x, a).iter().all(|&p| p >= COMMUNICATING_MIX / 5.0 - 1e-15));
                }
            }
        }
    }

    #[test]
    fn threshold_is_uniform_cost_minimizer() {
        let inst = gen_instance(&GenOptions::new(3, 3, 42)).unwrap();
        let j_c = evaluate_cost(&inst, inst.threshold_policy()).unwrap();
        for g in enumerate_policies(&inst, None, 1_000).unwrap() {
            let j = evaluate_cost(&inst, &g).unwrap();
            assert!(j_c.le_within(&j, 1e-9));
        }
    }

    #[test]
    fn random_threshold_keeps_instance_data() {
        let base = gen_instance(&GenOptions::new(4, 3, 9)).unwrap();
        let random = gen_instance(&GenOptions::new(4, 3, 9).threshold(ThresholdChoice::Random)).unwrap();
        assert_eq!(random.to_raw().transitions, base.to_raw().transitions);
        assert_eq!(random.to_raw().costs, base.to_raw().costs);
        let again = gen_instance(&GenOptions::new(4, 3, 9).threshold(ThresholdChoice::Random)).unwrap();
        assert_eq!(random, again);
    }
}
