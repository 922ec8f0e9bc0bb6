//! JSON instance documents with global action labels.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CmdpError, Result, Violation};
use crate::model::{validate_instance, CmdpInstance, Policy, RawInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub num_states: usize,
    /// Admissible action labels per state; position is the state-local index.
    pub actions: Vec<Vec<String>>,
    pub gamma: f64,
    pub beta: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    pub costs: Vec<Vec<f64>>,
    pub threshold_policy: Vec<String>,
    pub initial_state: usize,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance documents always serialize");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the compact serialization.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_vec(self).expect("instance documents always serialize");
        format!("sha256:{}", hex::encode(Sha256::digest(&compact)))
    }

    /// Labels `a0, a1, …` at every state.
    pub fn from_instance(inst: &CmdpInstance) -> Self {
        let raw = inst.to_raw();
        let actions: Vec<Vec<String>> =
            (0..raw.num_states).map(|x| (0..inst.num_actions(x)).map(|a| format!("a{a}")).collect()).collect();
        let threshold_policy = raw.threshold_policy.iter().map(|a| format!("a{a}")).collect();
        InstanceFile {
            num_states: raw.num_states,
            actions,
            gamma: raw.gamma,
            beta: raw.beta,
            transitions: raw.transitions,
            rewards: raw.rewards,
            costs: raw.costs,
            threshold_policy,
            initial_state: raw.initial_state,
        }
    }

    /// Resolves labels and validates; reports every violation found.
    pub fn to_instance(&self) -> Result<CmdpInstance> {
        let mut violations = Vec::new();
        if self.actions.len() != self.num_states {
            violations.push(Violation::DimensionMismatch {
                field: "actions".into(),
                detail: format!("has {} entries for {} states", self.actions.len(), self.num_states),
            });
        }
        if self.threshold_policy.len() != self.num_states {
            violations.push(Violation::DimensionMismatch {
                field: "threshold_policy".into(),
                detail: format!("has {} entries for {} states", self.threshold_policy.len(), self.num_states),
            });
        }
        if !violations.is_empty() {
            return Err(CmdpError::Validation(violations));
        }
        for (x, labels) in self.actions.iter().enumerate() {
            if labels.is_empty() {
                violations.push(Violation::EmptyActionSet { state: x });
            }
            let unique: HashSet<&String> = labels.iter().collect();
            if unique.len() != labels.len() {
                violations.push(Violation::DimensionMismatch {
                    field: "actions".into(),
                    detail: format!("duplicate action label at state {x}"),
                });
            }
            if self.transitions.get(x).is_some_and(|t| t.len() != labels.len()) {
                violations.push(Violation::DimensionMismatch {
                    field: "transitions".into(),
                    detail: format!(
                        "state {x} lists {} actions but {} transition rows",
                        labels.len(),
                        self.transitions[x].len()
                    ),
                });
            }
        }
        let mut threshold = Vec::with_capacity(self.num_states);
        for (x, label) in self.threshold_policy.iter().enumerate() {
            match self.actions[x].iter().position(|l| l == label) {
                Some(a) => threshold.push(a),
                None => {
                    violations.push(Violation::InadmissibleThresholdPolicy {
                        state: x,
                        detail: format!("label {label:?} is not admissible"),
                    });
                    threshold.push(0);
                }
            }
        }
        let raw = RawInstance {
            num_states: self.num_states,
            transitions: self.transitions.clone(),
            rewards: self.rewards.clone(),
            costs: self.costs.clone(),
            gamma: self.gamma,
            beta: self.beta,
            threshold_policy: threshold,
            initial_state: self.initial_state,
        };
        match validate_instance(raw) {
            Ok(inst) if violations.is_empty() => Ok(inst),
            Ok(_) => Err(CmdpError::Validation(violations)),
            Err(more) => {
                violations.extend(more);
                Err(CmdpError::Validation(violations))
            }
        }
    }

    /// Parses `"a0,a1,…"` (one label per state) into state-local indices.
    pub fn parse_policy(&self, text: &str) -> Result<Policy> {
        let labels: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if labels.len() != self.num_states {
            return Err(CmdpError::PolicyLength { expected: self.num_states, got: labels.len() });
        }
        labels
            .iter()
            .enumerate()
            .map(|(x, label)| {
                self.actions[x]
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| CmdpError::UnknownActionLabel { state: x, label: label.to_string() })
            })
            .collect::<Result<Vec<_>>>()
            .map(Policy)
    }

    pub fn policy_labels(&self, pi: &Policy) -> Vec<String> {
        pi.iter().enumerate().map(|(x, &a)| self.actions[x][a].clone()).collect()
    }
}
