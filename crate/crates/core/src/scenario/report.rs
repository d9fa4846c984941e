use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use super::analysis::Tolerances;
use super::spec::ConnectionSpec;
use crate::rational::ComponentLabel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub key: String,
    pub value: Value,
    pub operation: String,
    pub tolerance: Option<f64>,
}

/// Detailed output of one pipeline stage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Section {
    pub name: String,
    pub operation: String,
    pub data: Value,
}

/// A stage that failed without aborting the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartEcho {
    pub vars: Vec<String>,
    pub divisor: Vec<ComponentLabel>,
    pub basepoint: Vec<[f64; 2]>,
    pub params: std::collections::BTreeMap<String, String>,
}

/// A CSV trace written next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub name: String,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool: Tool,
    pub scenario: String,
    pub command: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub chart: ChartEcho,
    pub verdicts: Vec<Verdict>,
    pub sections: Vec<Section>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub traces: Vec<Trace>,
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl AnalysisReport {
    pub fn verdict(&self, key: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.key == key)
    }

    pub fn bool_verdict(&self, key: &str) -> Option<bool> {
        self.verdict(key).and_then(|v| v.value.as_bool())
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Largest exit code among recorded failures, 0 if none.
    pub fn failure_code(&self) -> i32 {
        self.failures.iter().map(|f| f.exit_code).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} | scenario {} | command {} | seed {}",
            self.tool.name, self.tool.version, self.scenario, self.command, self.seed
        );
        let _ = writeln!(out, "chart: {} on ({})", self.chart.vars.len(), self.chart.vars.join(", "));
        let global: Vec<&Verdict> = self.verdicts.iter().filter(|v| !v.key.contains('.')).collect();
        for v in global {
            let _ = write!(out, "{:<32} {:<10} via {}", v.key, value_text(&v.value), v.operation);
            if let Some(t) = v.tolerance {
                let _ = write!(out, " (tol {t:e})");
            }
            out.push('\n');
        }
        for c in &self.chart.divisor {
            let suffix = format!(".{}", c.index + 1);
            let parts: Vec<String> = self
                .verdicts
                .iter()
                .filter_map(|v| {
                    let (head, tail) = v.key.split_once('.')?;
                    let rest = tail.split_once('.').map_or((tail, None), |(a, b)| (a, Some(b)));
                    (format!(".{}", rest.0) == suffix).then(|| match rest.1 {
                        Some(dir) => format!("{head}[{dir}]={}", value_text(&v.value)),
                        None => format!("{head}={}", value_text(&v.value)),
                    })
                })
                .collect();
            let _ = writeln!(
                out,
                "component {} `{}` (multiplicity {}): {}",
                c.index + 1,
                c.equation,
                c.multiplicity,
                if parts.is_empty() {
                    "no verdicts".to_string()
                } else {
                    parts.join(", ")
                }
            );
        }
        for f in &self.failures {
            let _ = writeln!(out, "failed {}: {}", f.stage, f.message);
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub matched: Vec<String>,
    /// `(key, expected, actual)`.
    pub mismatched: Vec<(String, String, String)>,
    /// Expectations with no verdict in this report.
    pub skipped: Vec<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.mismatched.is_empty()
    }
}

pub fn check_expectations(spec: &ConnectionSpec, report: &AnalysisReport) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    for e in &spec.expect {
        match report.verdict(&e.key) {
            None => out.skipped.push(e.key.clone()),
            Some(v) => {
                let actual = value_text(&v.value);
                if actual == e.value {
                    out.matched.push(e.key.clone());
                } else {
                    out.mismatched.push((e.key.clone(), e.value.clone(), actual));
                }
            }
        }
    }
    out
}
