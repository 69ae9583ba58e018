//! Experiment configuration files.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! [experiment]
//! kind = "clt"            # simulate | clt | coverage | limit-law | mtest | hitting
//!
//! [plan]
//! reps = 5000
//! n = 2000
//! n_proxy = 100000        # optional, defaults to 50 n
//! seed = 42
//!
//! [urns.main]
//! a = 10
//! b = 10
//! k = 4
//! draw = { kind = "iid-uniform", h = 4 }
//! reinforcement = { kind = "uniform-range", lo = 1, hi = 3 }
//! ```
//!
//! Multi-urn experiments add more `[urns.<label>]` tables and optionally
//! `draw_factor` / `reinforcement_factor` tables with `values` and
//! `probabilities`.

use std::collections::BTreeMap;

use hrru_core::montecarlo::{ReplicationPlan, DEFAULT_PROXY_FACTOR};
use hrru_core::multi_urn::{FactorSpec, LinearCombination, SystemConfig};
use hrru_core::UrnConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Clt,
    Coverage,
    LimitLaw,
    Mtest,
    Hitting,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::LimitLaw => "limit-law",
            ExperimentKind::Mtest => "mtest",
            ExperimentKind::Hitting => "hitting",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Interval confidence level (simulate, coverage, mtest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Test significance level (mtest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    /// Urn under test (mtest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Reference urns (mtest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<String>>,
    /// Coefficients of a linear combination of limit proportions (mtest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination: Option<BTreeMap<String, f64>>,
    /// Walk start (hitting).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<u64>,
    /// Upper barrier (hitting).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    #[serde(default = "one")]
    pub reps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_proxy: Option<u64>,
    pub seed: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableFormat {
    #[default]
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn delimiter(self) -> char {
        match self {
            TableFormat::Csv => ',',
            TableFormat::Tsv => '\t',
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Tsv => "tsv",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub tables: TableFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub plan: PlanSection,
    #[serde(default)]
    pub urns: BTreeMap<String, UrnConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draw_factor: Option<FactorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reinforcement_factor: Option<FactorSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Parse and validate a configuration. Semantic problems are all reported at
/// once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map_or((0, 0), |span| line_column(text, span.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().trim_end().to_string(),
        }
    })?;
    let errs = config.validation_errors();
    if errs.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(errs))
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            urns: self.urns.clone(),
            draw_factor: self.draw_factor.clone(),
            reinforcement_factor: self.reinforcement_factor.clone(),
        }
    }

    /// The single urn of a one-urn experiment.
    pub fn single_urn(&self) -> Option<(&str, &UrnConfig)> {
        match self.urns.len() {
            1 if self.draw_factor.is_none() && self.reinforcement_factor.is_none() => {
                self.urns.iter().next().map(|(l, c)| (l.as_str(), c))
            }
            _ => None,
        }
    }

    pub fn n_proxy(&self) -> u64 {
        self.plan
            .n_proxy
            .unwrap_or_else(|| self.plan.n.unwrap_or(0).saturating_mul(DEFAULT_PROXY_FACTOR))
    }

    pub fn plan<C>(&self, config: C) -> ReplicationPlan<C> {
        ReplicationPlan::new(config, self.plan.reps, self.plan.n.unwrap_or(0), self.plan.seed)
            .with_proxy(self.n_proxy())
    }

    pub fn confidence(&self) -> f64 {
        self.experiment.confidence.unwrap_or(0.95)
    }

    pub fn significance(&self) -> f64 {
        self.experiment.significance.unwrap_or(0.05)
    }

    pub fn combination(&self) -> Option<LinearCombination> {
        self.experiment
            .combination
            .clone()
            .map(LinearCombination)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let kind = self.kind();
        let e = &self.experiment;

        for (field, value) in [("confidence", e.confidence), ("significance", e.significance)] {
            if let Some(v) = value {
                if !(v > 0.0 && v < 1.0) {
                    errs.push(format!("experiment.{field}: must lie in (0, 1) (got {v})"));
                }
            }
        }

        if kind == ExperimentKind::Hitting {
            match (e.start, e.h) {
                (Some(start), Some(h)) => {
                    if h < 3 || start < 2 || start + 1 > h {
                        errs.push(format!(
                            "experiment: 2 <= start <= h-1 and h >= 3 required (start = {start}, h = {h})"
                        ));
                    }
                }
                _ => errs.push("experiment: hitting needs `start` and `h`".to_string()),
            }
            if self.plan.reps < 1 {
                errs.push("plan.reps: reps >= 1 required".to_string());
            }
            return errs;
        }

        let Some(n) = self.plan.n else {
            errs.push(format!("plan.n: required for kind `{}`", kind.name()));
            return errs;
        };
        errs.extend(self.system().validation_errors());
        for label in self.urns.keys() {
            if !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                errs.push(format!(
                    "urns.{label}: labels may only contain ASCII letters, digits, '_' and '-'"
                ));
            }
        }

        match kind {
            ExperimentKind::Simulate => {
                if self.plan.reps != 1 {
                    errs.push(format!(
                        "plan.reps: simulate runs a single trajectory (reps = {})",
                        self.plan.reps
                    ));
                }
                if n < 1 {
                    errs.push("plan.n: n >= 1 required".to_string());
                }
            }
            ExperimentKind::Clt | ExperimentKind::Coverage | ExperimentKind::LimitLaw => {
                if self.single_urn().is_none() {
                    errs.push(format!(
                        "urns: kind `{}` needs exactly one urn and no common factors",
                        kind.name()
                    ));
                }
                errs.extend(self.plan_errors(n));
            }
            ExperimentKind::Mtest => {
                if self.urns.len() < 2 {
                    errs.push("urns: mtest needs at least two urns".to_string());
                }
                match (&e.target, &e.reference) {
                    (Some(target), Some(reference)) => {
                        if !self.urns.contains_key(target) {
                            errs.push(format!("experiment.target: unknown urn `{target}`"));
                        }
                        if reference.is_empty() {
                            errs.push("experiment.reference: must be nonempty".to_string());
                        }
                        for v in reference {
                            if v == target {
                                errs.push(format!(
                                    "experiment.reference: target `{target}` must not be a reference urn"
                                ));
                            } else if !self.urns.contains_key(v) {
                                errs.push(format!("experiment.reference: unknown urn `{v}`"));
                            }
                        }
                    }
                    _ => errs.push("experiment: mtest needs `target` and `reference`".to_string()),
                }
                if let Some(c) = self.combination() {
                    if let Err(err) = c.validate() {
                        errs.push(format!("experiment.combination: {err}"));
                    }
                    for label in c.0.keys() {
                        if !self.urns.contains_key(label) {
                            errs.push(format!("experiment.combination: unknown urn `{label}`"));
                        }
                    }
                }
                errs.extend(self.plan_errors(n));
            }
            ExperimentKind::Hitting => unreachable!(),
        }
        errs
    }

    fn plan_errors(&self, n: u64) -> Vec<String> {
        ReplicationPlan::new((), self.plan.reps, n, self.plan.seed)
            .with_proxy(self.n_proxy())
            .validation_errors()
            .into_iter()
            .map(|e| format!("plan.{e}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
kind = "simulate"

[plan]
n = 10
seed = 1

[urns.main]
a = 1
b = 1
k = 1
draw = { kind = "constant-one" }
reinforcement = { kind = "constant", value = 1 }
"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.kind(), ExperimentKind::Simulate);
        assert_eq!(c.plan.reps, 1);
        assert_eq!(c.single_urn().unwrap().0, "main");
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn k_above_total_is_rejected() {
        let text = MINIMAL.replace("k = 1", "k = 3");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid(errs) => {
                assert!(errs.iter().any(|e| e.contains("k <= a+b")), "{errs:?}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_policy_lists_menu() {
        let text = MINIMAL.replace("constant-one", "sometimes");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sometimes"), "{msg}");
        assert!(msg.contains("iid-uniform") && msg.contains("absorbing-random-walk"), "{msg}");
        assert!(matches!(err, ConfigError::Syntax { line: 13, .. }), "{err:?}");
    }

    #[test]
    fn syntax_error_has_position() {
        let text = MINIMAL.replace("n = 10", "n = = 10");
        match parse_config(&text).unwrap_err() {
            ConfigError::Syntax { line, column, .. } => {
                assert_eq!(line, 6);
                assert!(column > 1);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn all_semantic_errors_reported() {
        let text = MINIMAL
            .replace("kind = \"simulate\"", "kind = \"clt\"\nconfidence = 1.5")
            .replace("k = 1", "k = 5")
            .replace("value = 1", "value = 0");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid(errs) => {
                assert!(errs.len() >= 3, "{errs:?}");
                assert!(errs.iter().any(|e| e.starts_with("experiment.confidence")));
                assert!(errs.iter().any(|e| e.starts_with("urns.main.k")));
                assert!(errs.iter().any(|e| e.starts_with("urns.main.reinforcement")));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn mtest_requirements() {
        let text = MINIMAL.replace("kind = \"simulate\"", "kind = \"mtest\"");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid(errs) => {
                assert!(errs.iter().any(|e| e.contains("at least two urns")));
                assert!(errs.iter().any(|e| e.contains("`target` and `reference`")));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn labels_must_be_table_safe() {
        let text = MINIMAL.replace("[urns.main]", "[urns.\"a,b\"]");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid(errs) => assert!(errs[0].contains("labels may only")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("seed = 1", "seed = 1\nspeed = 2");
        assert!(matches!(parse_config(&text), Err(ConfigError::Syntax { .. })));
    }
}
