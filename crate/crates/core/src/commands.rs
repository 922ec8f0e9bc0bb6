//! Command execution shared by the binary and the test suites.
//!
//! Each command takes a parsed instance document and produces a
//! [`ReportFile`]; the binary only handles argument parsing, file I/O and
//! exit statuses.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::algorithms::{run_algorithm_a, run_online, run_refinement_loop};
use crate::error::{CmdpError, Result};
use crate::evaluation::{evaluate_cost, evaluate_reward, Criterion};
use crate::feasibility::{dp_action_set, SlacknessMode};
use crate::format::InstanceFile;
use crate::model::{CmdpInstance, Policy, EPS_FEAS};
use crate::oracle::{analyze_tf_fixed_point, run_oracle, OracleCertificate, OracleCheck};
use crate::report::{CommandEcho, IterationRow, ReportFile};
use crate::restricted::{solve_restricted, RestrictedMdp};

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_MAX_ROUNDS: usize = 1_000;

/// Where a procedure's starting policy comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum StartSpec {
    /// `π^c`
    Threshold,
    /// Uniform optimum over `A^{π^c}`.
    Dp,
    /// Final policy of algorithm 𝒜 started from `Dp`.
    AlgorithmA,
    /// Comma-separated action labels.
    Labels(String),
}

impl StartSpec {
    fn describe(&self) -> String {
        match self {
            StartSpec::Threshold => "threshold".into(),
            StartSpec::Dp => "dp".into(),
            StartSpec::AlgorithmA => "a".into(),
            StartSpec::Labels(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Validate,
    Eval { policy: Option<String> },
    SolveDp,
    RunA { slackness: SlacknessMode, start: StartSpec, max_iters: usize },
    Refine { slackness: SlacknessMode, start: StartSpec, max_rounds: usize },
    Online { start: StartSpec, steps: usize, seed: u64 },
    Oracle { checks: Vec<OracleCheck>, cap: u64 },
}

fn slackness_name(mode: SlacknessMode) -> &'static str {
    match mode {
        SlacknessMode::Zero => "zero",
        SlacknessMode::RelativeToThreshold => "relative",
    }
}

fn check_name(check: OracleCheck) -> &'static str {
    match check {
        OracleCheck::Phi => "phi",
        OracleCheck::VStar => "vstar",
        OracleCheck::Tf => "tf",
        OracleCheck::Corollary => "corollary",
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Eval { .. } => "eval",
            Command::SolveDp => "solve-dp",
            Command::RunA { .. } => "run-a",
            Command::Refine { .. } => "refine",
            Command::Online { .. } => "online",
            Command::Oracle { .. } => "oracle",
        }
    }

    fn echo(&self) -> CommandEcho {
        let mut args = BTreeMap::new();
        match self {
            Command::Validate | Command::SolveDp => {}
            Command::Eval { policy } => {
                args.insert("policy".into(), policy.clone().unwrap_or_else(|| "threshold".into()));
            }
            Command::RunA { slackness, start, max_iters } => {
                args.insert("slackness".into(), slackness_name(*slackness).into());
                args.insert("start".into(), start.describe());
                args.insert("max_iters".into(), max_iters.to_string());
            }
            Command::Refine { slackness, start, max_rounds } => {
                args.insert("slackness".into(), slackness_name(*slackness).into());
                args.insert("start".into(), start.describe());
                args.insert("max_rounds".into(), max_rounds.to_string());
            }
            Command::Online { start, steps, seed } => {
                args.insert("start".into(), start.describe());
                args.insert("steps".into(), steps.to_string());
                args.insert("seed".into(), seed.to_string());
            }
            Command::Oracle { checks, cap } => {
                let names: Vec<&str> = checks.iter().map(|&c| check_name(c)).collect();
                args.insert("check".into(), names.join(","));
                args.insert("cap".into(), cap.to_string());
            }
        }
        CommandEcho { name: self.name().into(), args }
    }
}

/// Resolves a start specification to a concrete policy.
pub fn resolve_start(
    file: &InstanceFile,
    inst: &CmdpInstance,
    start: &StartSpec,
    slackness: SlacknessMode,
) -> Result<Policy> {
    match start {
        StartSpec::Threshold => Ok(inst.threshold_policy().clone()),
        StartSpec::Dp => dp_policy(inst),
        StartSpec::AlgorithmA => {
            let trace = run_algorithm_a(inst, &dp_policy(inst)?, slackness, DEFAULT_MAX_ITERS)?;
            Ok(trace.final_record().policy.clone())
        }
        StartSpec::Labels(text) => {
            let pi = file.parse_policy(text)?;
            inst.check_policy(&pi)?;
            Ok(pi)
        }
    }
}

/// Uniform optimum of the MDP restricted to `A^{π^c}`.
pub fn dp_policy(inst: &CmdpInstance) -> Result<Policy> {
    let mdp = RestrictedMdp::new(inst, dp_action_set(inst, inst.threshold_policy())?)?;
    Ok(solve_restricted(&mdp, Criterion::Reward)?.policy)
}

fn row(
    file: &InstanceFile,
    inst: &CmdpInstance,
    t: usize,
    pi: &Policy,
    sizes: Option<Vec<usize>>,
) -> Result<IterationRow> {
    let sizes = match sizes {
        Some(s) => s,
        None => dp_action_set(inst, pi)?.sizes(),
    };
    Ok(IterationRow {
        t,
        policy: file.policy_labels(pi),
        reward_value: evaluate_reward(inst, pi)?.0,
        cost_value: evaluate_cost(inst, pi)?.0,
        action_set_sizes: sizes,
    })
}

fn labels_json(file: &InstanceFile, pi: &Policy) -> Value {
    json!(file.policy_labels(pi))
}

fn certificate_json(file: &InstanceFile, cert: &OracleCertificate) -> Value {
    let mut out = serde_json::Map::new();
    if let Some(opt) = &cert.constrained_optimum {
        out.insert("phi_size".into(), json!(cert.phi_members.len()));
        out.insert("phi_members".into(), Value::Array(cert.phi_members.iter().map(|p| labels_json(file, p)).collect()));
        out.insert(
            "constrained_optimum".into(),
            json!({
                "values": opt.values.0,
                "achievers": opt.achievers.iter().map(|p| labels_json(file, p)).collect::<Vec<_>>(),
            }),
        );
    }
    if !cert.uniform_optimum.is_empty() {
        let tables: Vec<Value> = cert
            .uniform_optimum
            .iter()
            .map(|u| json!({"argument": labels_json(file, &u.argument), "values": u.values.0, "achiever": labels_json(file, &u.achiever)}))
            .collect();
        out.insert("uniform_optimum".into(), Value::Array(tables));
    }
    if let Some(phi) = &cert.corollary_policy {
        out.insert("corollary_policy".into(), labels_json(file, phi));
    }
    out.insert("checks".into(), serde_json::to_value(&cert.checks).expect("check records serialize"));
    out.insert("all_passed".into(), json!(cert.all_passed()));
    Value::Object(out)
}

/// Runs `cmd` against `file`. Validation failures surface as `CmdpError::Validation`.
pub fn run_command(cmd: &Command, file: &InstanceFile) -> Result<ReportFile> {
    let inst = file.to_instance()?;
    let mut report = ReportFile {
        command: cmd.echo(),
        instance_digest: file.digest(),
        seed: None,
        iterations: Vec::new(),
        stop_reason: None,
        result: Value::Null,
        wall_time_ms: None,
    };
    match cmd {
        Command::Validate => {
            report.result = json!({
                "valid": true,
                "num_states": inst.num_states(),
                "policy_count": inst.policy_count().to_string(),
            });
        }
        Command::Eval { policy } => {
            let pi = match policy {
                Some(text) => resolve_start(file, &inst, &StartSpec::Labels(text.clone()), SlacknessMode::Zero)?,
                None => inst.threshold_policy().clone(),
            };
            let r = row(file, &inst, 0, &pi, None)?;
            let j_c = evaluate_cost(&inst, inst.threshold_policy())?;
            let feasible = evaluate_cost(&inst, &pi)?.le_within(&j_c, EPS_FEAS);
            report.result = json!({
                "policy": r.policy,
                "reward_value": r.reward_value,
                "cost_value": r.cost_value,
                "threshold_feasible": feasible,
            });
            report.iterations.push(r);
        }
        Command::SolveDp => {
            let allowed = dp_action_set(&inst, inst.threshold_policy())?;
            let solved = solve_restricted(&RestrictedMdp::new(&inst, allowed.clone())?, Criterion::Reward)?;
            let r = row(file, &inst, 0, &solved.policy, Some(allowed.sizes()))?;
            let allowed_labels: Vec<Vec<String>> = allowed
                .sets()
                .iter()
                .enumerate()
                .map(|(x, s)| s.iter().map(|&a| file.actions[x][a].clone()).collect())
                .collect();
            report.result = json!({
                "policy": r.policy,
                "reward_value": r.reward_value,
                "cost_value": r.cost_value,
                "action_sets": allowed_labels,
                "policy_iterations": solved.iterations,
            });
            report.iterations.push(r);
        }
        Command::RunA { slackness, start, max_iters } => {
            let start_policy = resolve_start(file, &inst, start, *slackness)?;
            let trace = run_algorithm_a(&inst, &start_policy, *slackness, *max_iters)?;
            for (i, rec) in trace.iterations.iter().enumerate() {
                report.iterations.push(IterationRow {
                    t: i,
                    policy: file.policy_labels(&rec.policy),
                    reward_value: rec.reward_value.0.clone(),
                    cost_value: rec.cost_value.0.clone(),
                    action_set_sizes: rec.action_sets.sizes(),
                });
            }
            let last = trace.final_record();
            report.stop_reason = Some(format!("{:?}", trace.stop_reason));
            report.result = json!({
                "final_policy": labels_json(file, &last.policy),
                "final_reward_value": last.reward_value.0,
                "final_cost_value": last.cost_value.0,
                "restricted_solves": trace.solves(),
            });
        }
        Command::Refine { slackness, start, max_rounds } => {
            let start_policy = resolve_start(file, &inst, start, *slackness)?;
            let outcomes = run_refinement_loop(&inst, &start_policy, *max_rounds)?;
            report.iterations.push(row(file, &inst, 0, &start_policy, None)?);
            for o in &outcomes {
                report.iterations.push(row(file, &inst, o.round, &o.policy, None)?);
            }
            report.stop_reason = outcomes.last().map(|o| format!("{:?}", o.kind));
            let listed: Vec<Value> = outcomes
                .iter()
                .map(|o| {
                    json!({
                        "round": o.round,
                        "kind": format!("{:?}", o.kind),
                        "policy": labels_json(file, &o.policy),
                        "before": o.before.0,
                        "after": o.after.0,
                    })
                })
                .collect();
            report.result = json!({"start_policy": labels_json(file, &start_policy), "outcomes": listed});
        }
        Command::Online { start, steps, seed } => {
            let pi_0 = resolve_start(file, &inst, start, SlacknessMode::Zero)?;
            let trace = run_online(&inst, &pi_0, *steps, *seed)?;
            report.seed = Some(*seed);
            report.iterations.push(row(file, &inst, 0, &trace.initial_policy, None)?);
            for s in &trace.steps {
                report.iterations.push(IterationRow {
                    t: s.time + 1,
                    policy: file.policy_labels(&s.policy),
                    reward_value: s.reward_value.0.clone(),
                    cost_value: s.cost_value.0.clone(),
                    action_set_sizes: dp_action_set(&inst, &s.policy)?.sizes(),
                });
            }
            let stabilized = trace.is_stabilized(inst.num_states());
            report.stop_reason = Some(if stabilized { "Stabilized".into() } else { "StepsExhausted".into() });
            report.result = json!({
                "generator": trace.generator,
                "final_policy": labels_json(file, trace.final_policy()),
                "final_reward_value": trace.final_reward_value().0,
                "last_change": trace.last_change(),
                "stabilized": stabilized,
                "states": trace.steps.iter().map(|s| s.state).collect::<Vec<_>>(),
                "actions": trace.steps.iter().map(|s| file.actions[s.state][s.action_taken].clone()).collect::<Vec<_>>(),
            });
        }
        Command::Oracle { checks, cap } => {
            if checks.is_empty() {
                return Err(CmdpError::InvalidArgument("no oracle checks requested".into()));
            }
            let cert = run_oracle(&inst, checks, *cap)?;
            report.stop_reason = Some(if cert.all_passed() { "AllChecksPassed".into() } else { "CheckFailed".into() });
            report.result = certificate_json(file, &cert);
            if checks.contains(&OracleCheck::Tf) {
                let a = analyze_tf_fixed_point(&inst, *cap)?;
                report.result["tf_analysis"] = json!({
                    "max_discrepancy": a.max_discrepancy,
                    "min_signed_gap": a.min_signed_gap,
                    "departures": a.departing.len(),
                    "unexplained": a.unexplained,
                    "nesting_witness": a.witness.map(|(p, s)| json!({"pi": labels_json(file, &p), "sigma": labels_json(file, &s)})),
                });
            }
        }
    }
    Ok(report)
}

/// Whether a finished report records a failed internal check.
pub fn report_has_failed_check(report: &ReportFile) -> bool {
    report.result.get("all_passed") == Some(&Value::Bool(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gen_instance, GenOptions};

    fn seed_42() -> InstanceFile {
        InstanceFile::from_instance(&gen_instance(&GenOptions::new(3, 3, 42)).unwrap())
    }

    #[test]
    fn every_command_runs() {
        let file = seed_42();
        let cmds = [
            Command::Validate,
            Command::Eval { policy: Some("a0,a1,a2".into()) },
            Command::SolveDp,
            Command::RunA { slackness: SlacknessMode::RelativeToThreshold, start: StartSpec::Dp, max_iters: 100 },
            Command::Refine { slackness: SlacknessMode::Zero, start: StartSpec::AlgorithmA, max_rounds: 100 },
            Command::Online { start: StartSpec::Threshold, steps: 50, seed: 3 },
            Command::Oracle {
                checks: vec![OracleCheck::Phi, OracleCheck::VStar, OracleCheck::Corollary],
                cap: 1_000_000,
            },
        ];
        for cmd in &cmds {
            let report = run_command(cmd, &file).unwrap();
            assert_eq!(report.command.name, cmd.name());
            assert!(!report_has_failed_check(&report));
            assert!(!report.render_table().is_empty());
        }
    }

    #[test]
    fn run_a_final_value_below_constrained_optimum() {
        let file = seed_42();
        let a = run_command(
            &Command::RunA { slackness: SlacknessMode::RelativeToThreshold, start: StartSpec::Dp, max_iters: 100 },
            &file,
        )
        .unwrap();
        let o = run_command(&Command::Oracle { checks: vec![OracleCheck::Phi], cap: 1_000_000 }, &file).unwrap();
        let final_v: Vec<f64> = serde_json::from_value(a.result["final_reward_value"].clone()).unwrap();
        let vc: Vec<f64> = serde_json::from_value(o.result["constrained_optimum"]["values"].clone()).unwrap();
        for (v, c) in final_v.iter().zip(&vc) {
            assert!(*v <= c + 1e-8);
        }
    }

    #[test]
    fn start_from_labels() {
        let file = seed_42();
        let inst = file.to_instance().unwrap();
        let labels = file.policy_labels(inst.threshold_policy()).join(",");
        let pi = resolve_start(&file, &inst, &StartSpec::Labels(labels), SlacknessMode::Zero).unwrap();
        assert_eq!(&pi, inst.threshold_policy());
    }

    #[test]
    fn failed_tf_check_is_reported() {
        let report =
            run_command(&Command::Oracle { checks: vec![OracleCheck::Tf], cap: 1_000_000 }, &seed_42()).unwrap();
        assert!(report_has_failed_check(&report));
        assert_eq!(report.result["tf_analysis"]["unexplained"], json!(0));
        assert_eq!(report.stop_reason.as_deref(), Some("CheckFailed"));
    }
}
