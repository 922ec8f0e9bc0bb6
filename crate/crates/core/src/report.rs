//! Structured run reports and their human-readable rendering.
//!
//! The JSON form carries every float at full precision (shortest string that
//! parses back to the same `f64`). The table form is derived from it and
//! rounds to six decimals or six significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandEcho {
    pub name: String,
    pub args: BTreeMap<String, String>,
}

/// One row of the per-iteration table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub t: usize,
    pub policy: Vec<String>,
    pub reward_value: Vec<f64>,
    pub cost_value: Vec<f64>,
    /// `|α_{π_t}(x)|` per state.
    pub action_set_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub command: CommandEcho,
    pub instance_digest: String,
    pub seed: Option<u64>,
    pub iterations: Vec<IterationRow>,
    pub stop_reason: Option<String>,
    pub result: Value,
    /// Only present when timing was requested; everything else is deterministic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

/// Six-decimal rendering used by every table cell; magnitudes below 1e-3
/// switch to scientific notation so tolerances stay readable.
pub fn fmt_num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.6e}")
    } else {
        format!("{v:.6}")
    }
}

impl ReportFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let args: Vec<String> = self.command.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "command: {} {}", self.command.name, args.join(" "));
        let _ = writeln!(out, "instance: {}", self.instance_digest);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed: {seed}");
        }
        if !self.iterations.is_empty() {
            let n = self.iterations[0].reward_value.len();
            let mut header = vec!["t".to_string(), "policy".to_string()];
            header.extend((0..n).map(|x| format!("V[{x}]")));
            header.extend((0..n).map(|x| format!("J[{x}]")));
            header.extend((0..n).map(|x| format!("|A[{x}]|")));
            let _ = writeln!(out, "{}", header.join("\t"));
            for row in &self.iterations {
                let mut cells = vec![row.t.to_string(), row.policy.join(",")];
                cells.extend(row.reward_value.iter().map(|&v| fmt_num(v)));
                cells.extend(row.cost_value.iter().map(|&v| fmt_num(v)));
                cells.extend(row.action_set_sizes.iter().map(ToString::to_string));
                let _ = writeln!(out, "{}", cells.join("\t"));
            }
        }
        if let Some(reason) = &self.stop_reason {
            let _ = writeln!(out, "stop: {reason}");
        }
        render_value(&mut out, "result", &self.result, 0);
        if let Some(ms) = self.wall_time_ms {
            let _ = writeln!(out, "wall time: {} ms", fmt_num(ms));
        }
        out
    }
}

fn render_value(out: &mut String, key: &str, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            let _ = writeln!(out, "{pad}{key}:");
            for (k, child) in map {
                render_value(out, k, child, depth + 1);
            }
        }
        Value::Array(items) if items.iter().all(is_scalar) => {
            let cells: Vec<String> = items.iter().map(scalar).collect();
            let _ = writeln!(out, "{pad}{key}: [{}]", cells.join(", "));
        }
        Value::Array(items) => {
            let _ = writeln!(out, "{pad}{key}:");
            for (i, child) in items.iter().enumerate() {
                render_value(out, &format!("[{i}]"), child, depth + 1);
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{key}: {}", scalar(other));
        }
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => fmt_num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "-".into(),
        _ => unreachable!("scalar() only sees scalars"),
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn sample() -> ReportFile {
        ReportFile {
            command: CommandEcho { name: "eval".into(), args: BTreeMap::from([("policy".into(), "a0,a1".into())]) },
            instance_digest: "sha256:00".into(),
            seed: None,
            iterations: vec![IterationRow {
                t: 0,
                policy: vec!["a0".into(), "a1".into()],
                reward_value: vec![1.0 / 3.0, 20.0 / 7.0],
                cost_value: vec![0.1, 1e-7],
                action_set_sizes: vec![1, 2],
            }],
            stop_reason: None,
            result: json!({"feasible": true, "reward_value": [1.0 / 3.0, 2.5]}),
            wall_time_ms: None,
        }
    }

    #[test]
    fn json_keeps_full_precision() {
        let r = sample();
        let back = ReportFile::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.iterations[0].reward_value[0].to_bits(), (1.0f64 / 3.0).to_bits());
        assert!(!r.to_json().contains("wall_time_ms"));
    }

    // Every number printed in the table is the rounded structured value.
    #[test]
    fn table_cells_match_structured_values() {
        let r = sample();
        let table = r.render_table();
        let row = table.lines().find(|l| l.starts_with("0\t")).unwrap();
        let cells: Vec<&str> = row.split('\t').collect();
        let it = &r.iterations[0];
        let expected: Vec<String> = it
            .reward_value
            .iter()
            .chain(&it.cost_value)
            .map(|&v| fmt_num(v))
            .chain(it.action_set_sizes.iter().map(ToString::to_string))
            .collect();
        assert_eq!(&cells[2..], expected.as_slice());
        for cell in &cells[2..6] {
            let parsed: f64 = cell.parse().unwrap();
            let original = it.reward_value.iter().chain(&it.cost_value).any(|&v| (v - parsed).abs() <= 5e-7);
            assert!(original);
        }
        assert!(table.contains("reward_value: [0.333333, 2.500000]"));
    }
}
