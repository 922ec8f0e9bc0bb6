//! Brute-force ground truth for instances small enough to enumerate.
//!
//! Every quantity here is computed by exhaustive enumeration of policies and
//! exact evaluation of each one, then compared against the policy-iteration
//! route in [`crate::restricted`].

use serde::{Deserialize, Serialize};

use crate::error::{CmdpError, Result};
use crate::evaluation::{evaluate_cost, evaluate_reward, Criterion};
use crate::feasibility::{dp_action_set, ActionSetMap};
use crate::model::{CmdpInstance, Policy, ValueFunction, EPS_FEAS};
use crate::restricted::{apply_tf, solve_restricted, PolicyValueTable, RestrictedMdp};

pub use crate::enumerate::{enumerate_policies, policy_rank, PolicyEnumerator};

/// Agreement required between the enumeration and policy-iteration routes.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

/// Tolerance for membership in an argmax set built from computed backups.
const ARGMAX_TOLERANCE: f64 = 1e-9;

/// Number of policy arguments whose `V*(·, π)` is re-derived by enumeration
/// when building the full table.
const CROSS_CHECK_SAMPLES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub max_discrepancy: f64,
    pub tolerance: f64,
}

impl CheckRecord {
    fn new(name: &str, max_discrepancy: f64, tolerance: f64) -> Self {
        CheckRecord { name: name.to_string(), passed: max_discrepancy <= tolerance, max_discrepancy, tolerance }
    }
}

/// `V*_c(·, π^c)` with a maximizing policy per state. No single policy need
/// attain the maximum at every state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedOptimum {
    pub phi_members: Vec<Policy>,
    pub values: ValueFunction,
    pub achievers: Vec<Policy>,
}

/// `V*(·, π)` over the DP-inducible set of `π`, with one policy attaining it everywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformOptimum {
    pub argument: Policy,
    pub values: ValueFunction,
    pub achiever: Policy,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleCertificate {
    pub phi_members: Vec<Policy>,
    pub constrained_optimum: Option<ConstrainedOptimum>,
    pub uniform_optimum: Vec<UniformOptimum>,
    pub corollary_policy: Option<Policy>,
    pub checks: Vec<CheckRecord>,
}

impl OracleCertificate {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleCheck {
    Phi,
    VStar,
    Tf,
    Corollary,
}

impl OracleCheck {
    pub const ALL: [OracleCheck; 4] = [OracleCheck::Phi, OracleCheck::VStar, OracleCheck::Tf, OracleCheck::Corollary];
}

/// Reward and cost values of every policy in `Π`, in lexicographic order.
#[derive(Clone, Debug)]
pub struct PolicyEvaluations {
    pub policies: Vec<Policy>,
    pub reward: Vec<ValueFunction>,
    pub cost: Vec<ValueFunction>,
}

impl PolicyEvaluations {
    pub fn compute(inst: &CmdpInstance, cap: u64) -> Result<Self> {
        let policies: Vec<Policy> = enumerate_policies(inst, None, cap)?.collect();
        let mut reward = Vec::with_capacity(policies.len());
        let mut cost = Vec::with_capacity(policies.len());
        for g in &policies {
            reward.push(evaluate_reward(inst, g)?);
            cost.push(evaluate_cost(inst, g)?);
        }
        Ok(PolicyEvaluations { policies, reward, cost })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    /// Componentwise max of `V^g` over the policies selected by `keep`.
    pub fn max_reward_where(&self, n: usize, mut keep: impl FnMut(usize) -> bool) -> ValueFunction {
        let mut best = ValueFunction::constant(n, f64::NEG_INFINITY);
        for i in (0..self.len()).filter(|&i| keep(i)) {
            for x in 0..n {
                best.0[x] = best.0[x].max(self.reward[i][x]);
            }
        }
        best
    }
}

/// `Φ(π^c)` and `V*_c(·, π^c)` by exhaustive cost and reward evaluation.
pub fn constrained_optimum(inst: &CmdpInstance, cap: u64) -> Result<ConstrainedOptimum> {
    let evals = PolicyEvaluations::compute(inst, cap)?;
    Ok(constrained_optimum_from(inst, &evals))
}

pub fn constrained_optimum_from(inst: &CmdpInstance, evals: &PolicyEvaluations) -> ConstrainedOptimum {
    let n = inst.num_states();
    let j_c = &evals.cost[policy_rank(inst, inst.threshold_policy())];
    let members: Vec<usize> = (0..evals.len()).filter(|&i| evals.cost[i].le_within(j_c, EPS_FEAS)).collect();
    let mut values = ValueFunction::constant(n, f64::NEG_INFINITY);
    let mut achievers = vec![inst.threshold_policy().clone(); n];
    for &i in &members {
        for x in 0..n {
            if evals.reward[i][x] > values[x] {
                values.0[x] = evals.reward[i][x];
                achievers[x] = evals.policies[i].clone();
            }
        }
    }
    ConstrainedOptimum { phi_members: members.iter().map(|&i| evals.policies[i].clone()).collect(), values, achievers }
}

/// `max_{g ∈ Π} V^g(x)` by enumeration.
pub fn unconstrained_optimum(inst: &CmdpInstance, cap: u64) -> Result<ValueFunction> {
    let evals = PolicyEvaluations::compute(inst, cap)?;
    Ok(evals.max_reward_where(inst.num_states(), |_| true))
}

/// `V*(·, π) = max_{g ∈ F(π)} V^g` by enumeration, checked against policy iteration.
pub fn uniform_optimum(inst: &CmdpInstance, pi: &Policy, cap: u64) -> Result<UniformOptimum> {
    let allowed = dp_action_set(inst, pi)?;
    let n = inst.num_states();
    let mut members = Vec::new();
    for g in enumerate_policies(inst, Some(&allowed), cap)? {
        let v = evaluate_reward(inst, &g)?;
        members.push((g, v));
    }
    let mut values = ValueFunction::constant(n, f64::NEG_INFINITY);
    for (_, v) in &members {
        for x in 0..n {
            values.0[x] = values.0[x].max(v[x]);
        }
    }
    // a single member must reach the maximum at every state
    let mut best_gap = f64::INFINITY;
    let mut achiever = None;
    for (g, v) in &members {
        let gap = values.max_excess_over(v).1;
        if gap < best_gap {
            best_gap = gap;
            achiever = Some(g.clone());
        }
    }
    if best_gap > ORACLE_TOLERANCE {
        return Err(CmdpError::NoSingleAchiever { gap: best_gap });
    }
    let solved = solve_restricted(&RestrictedMdp::new(inst, allowed)?, Criterion::Reward)?;
    let disagreement = solved.value.sup_distance(&values);
    if disagreement > ORACLE_TOLERANCE {
        return Err(CmdpError::OracleMismatch { check: "uniform_optimum".into(), discrepancy: disagreement });
    }
    Ok(UniformOptimum { argument: pi.clone(), values, achiever: achiever.expect("F(pi) contains pi") })
}

/// `V*(·, π)` for every `π ∈ Π` through policy iteration, with an evenly spaced
/// sample re-derived by enumeration.
pub fn vstar_table(inst: &CmdpInstance, cap: u64) -> Result<PolicyValueTable> {
    let all: Vec<Policy> = enumerate_policies(inst, None, cap)?.collect();
    let mut table = PolicyValueTable::new();
    for pi in &all {
        let mdp = RestrictedMdp::new(inst, dp_action_set(inst, pi)?)?;
        table.insert(pi.clone(), solve_restricted(&mdp, Criterion::Reward)?.value);
    }
    let stride = all.len().div_ceil(CROSS_CHECK_SAMPLES).max(1);
    for pi in all.iter().step_by(stride) {
        let enumerated = uniform_optimum(inst, pi, cap)?;
        let d = enumerated.values.sup_distance(table.get(pi).expect("filled above"));
        if d > ORACLE_TOLERANCE {
            return Err(CmdpError::OracleMismatch { check: "vstar_table".into(), discrepancy: d });
        }
    }
    Ok(table)
}

fn dp_inducer(inst: &CmdpInstance) -> impl Fn(&Policy) -> Result<ActionSetMap> + '_ {
    move |p: &Policy| dp_action_set(inst, p)
}

/// `max |T_F(V*)(x,π) − V*(x,π)|` over `X × Π`.
pub fn verify_tf_fixed_point(inst: &CmdpInstance, cap: u64) -> Result<CheckRecord> {
    let table = vstar_table(inst, cap)?;
    let mut worst: f64 = 0.0;
    for (pi, v) in table.iter() {
        let applied = apply_tf(inst, &table, pi, dp_inducer(inst), cap)?;
        worst = worst.max(applied.sup_distance(v));
    }
    Ok(CheckRecord::new("tf_fixed_point", worst, ORACLE_TOLERANCE))
}

/// Where `T_F(V*)` departs from `V*`, and whether each departure is accounted
/// for by induced sets that fail to nest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TfAnalysis {
    pub max_discrepancy: f64,
    /// `min over (x,π) of T_F(V*)(x,π) − V*(x,π)`; never below `−ORACLE_TOLERANCE`.
    pub min_signed_gap: f64,
    /// Arguments `π` with a discrepancy above tolerance, in lexicographic order.
    pub departing: Vec<Policy>,
    /// Departures with no `σ ∈ F(π)` such that `V*(·,σ) ≰ V*(·,π)`.
    pub unexplained: usize,
    /// First `(π, σ)` found with `σ ∈ F(π)` and `V*(·,σ) ≰ V*(·,π)`.
    pub witness: Option<(Policy, Policy)>,
}

pub fn analyze_tf_fixed_point(inst: &CmdpInstance, cap: u64) -> Result<TfAnalysis> {
    let table = vstar_table(inst, cap)?;
    let mut out = TfAnalysis {
        max_discrepancy: 0.0,
        min_signed_gap: f64::INFINITY,
        departing: Vec::new(),
        unexplained: 0,
        witness: None,
    };
    let mut args: Vec<&Policy> = table.iter().map(|(p, _)| p).collect();
    args.sort();
    for pi in args {
        let v = table.get(pi).expect("key from table");
        let applied = apply_tf(inst, &table, pi, dp_inducer(inst), cap)?;
        let d = applied.sup_distance(v);
        out.max_discrepancy = out.max_discrepancy.max(d);
        for x in 0..inst.num_states() {
            out.min_signed_gap = out.min_signed_gap.min(applied[x] - v[x]);
        }
        if d <= ORACLE_TOLERANCE {
            continue;
        }
        out.departing.push(pi.clone());
        let allowed = dp_action_set(inst, pi)?;
        let sigma = enumerate_policies(inst, Some(&allowed), cap)?
            .find(|s| !table.get(s).expect("table covers Π").le_within(v, ORACLE_TOLERANCE));
        match sigma {
            Some(s) => {
                out.witness.get_or_insert((pi.clone(), s));
            }
            None => out.unexplained += 1,
        }
    }
    Ok(out)
}

/// `A*(x)` collected from every maximizer of the `T_F` backup at `x`.
pub fn optimal_action_sets(inst: &CmdpInstance, pi: &Policy, cap: u64) -> Result<Vec<Vec<usize>>> {
    let allowed = dp_action_set(inst, pi)?;
    let n = inst.num_states();
    let mut scored: Vec<(Policy, Vec<f64>)> = Vec::new();
    for g in enumerate_policies(inst, Some(&allowed), cap)? {
        let mdp = RestrictedMdp::new(inst, dp_action_set(inst, &g)?)?;
        let v_star_g = solve_restricted(&mdp, Criterion::Reward)?.value;
        let q: Vec<f64> = (0..n).map(|x| inst.reward_backup(x, g[x], v_star_g.as_slice())).collect();
        scored.push((g, q));
    }
    Ok((0..n)
        .map(|x| {
            let best = scored.iter().map(|(_, q)| q[x]).fold(f64::NEG_INFINITY, f64::max);
            let mut set: Vec<usize> =
                scored.iter().filter(|(_, q)| q[x] >= best - ARGMAX_TOLERANCE).map(|(g, _)| g[x]).collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect())
}

/// `φ(x) = min(A*(x) ∩ A^π(x))`, checked to reach `V*(·, π)`.
pub fn corollary_policy(inst: &CmdpInstance, pi: &Policy, cap: u64) -> Result<Policy> {
    let a_star = optimal_action_sets(inst, pi, cap)?;
    let a_pi = dp_action_set(inst, pi)?;
    let mut phi = Vec::with_capacity(inst.num_states());
    for (x, set) in a_star.iter().enumerate() {
        let chosen =
            set.iter().copied().find(|&a| a_pi.contains(x, a)).ok_or(CmdpError::EmptyIntersection { state: x })?;
        phi.push(chosen);
    }
    let phi = Policy(phi);
    let target = uniform_optimum(inst, pi, cap)?;
    let d = evaluate_reward(inst, &phi)?.sup_distance(&target.values);
    if d > ORACLE_TOLERANCE {
        return Err(CmdpError::OracleMismatch { check: "corollary_policy".into(), discrepancy: d });
    }
    Ok(phi)
}

/// Runs the requested checks against the threshold policy `π^c`.
pub fn run_oracle(inst: &CmdpInstance, checks: &[OracleCheck], cap: u64) -> Result<OracleCertificate> {
    let mut cert = OracleCertificate::default();
    let pi_c = inst.threshold_policy();
    if checks.contains(&OracleCheck::Phi) {
        let evals = PolicyEvaluations::compute(inst, cap)?;
        let opt = constrained_optimum_from(inst, &evals);
        let j_c = &evals.cost[policy_rank(inst, pi_c)];
        let worst_member = opt
            .phi_members
            .iter()
            .map(|g| evals.cost[policy_rank(inst, g)].max_excess_over(j_c).1.max(0.0))
            .fold(0.0, f64::max);
        cert.checks.push(CheckRecord::new("phi_membership", worst_member, EPS_FEAS));

        let lower = uniform_optimum(inst, pi_c, cap)?;
        let upper = evals.max_reward_where(inst.num_states(), |_| true);
        let low_gap = lower.values.max_excess_over(&opt.values).1.max(0.0);
        let high_gap = opt.values.max_excess_over(&upper).1.max(0.0);
        cert.checks.push(CheckRecord::new("sandwich", low_gap.max(high_gap), ORACLE_TOLERANCE));
        cert.phi_members = opt.phi_members.clone();
        cert.constrained_optimum = Some(opt);
    }
    if checks.contains(&OracleCheck::VStar) {
        let opt = uniform_optimum(inst, pi_c, cap)?;
        let mdp = RestrictedMdp::new(inst, dp_action_set(inst, pi_c)?)?;
        let solved = solve_restricted(&mdp, Criterion::Reward)?;
        let achiever_gap = evaluate_reward(inst, &opt.achiever)?.sup_distance(&opt.values);
        cert.checks.push(CheckRecord::new("single_achiever", achiever_gap, ORACLE_TOLERANCE));
        cert.checks.push(CheckRecord::new(
            "solver_agreement",
            solved.value.sup_distance(&opt.values),
            ORACLE_TOLERANCE,
        ));
        cert.uniform_optimum.push(opt);
    }
    if checks.contains(&OracleCheck::Tf) {
        cert.checks.push(verify_tf_fixed_point(inst, cap)?);
    }
    if checks.contains(&OracleCheck::Corollary) {
        let phi = corollary_policy(inst, pi_c, cap)?;
        let target = uniform_optimum(inst, pi_c, cap)?;
        let d = evaluate_reward(inst, &phi)?.sup_distance(&target.values);
        let in_set = if dp_action_set(inst, pi_c)?.admits(&phi) { 0.0 } else { f64::INFINITY };
        cert.checks.push(CheckRecord::new("corollary", d.max(in_set), ORACLE_TOLERANCE));
        cert.corollary_policy = Some(phi);
    }
    Ok(cert)
}
