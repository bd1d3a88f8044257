//! Finding data model, severity weights, and deterministic merging.

mod registry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pysource::Span;

pub use registry::{catalog, registry, registry_lookup, rules, CatalogEntry, RuleDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Info,
        Severity::Low,
        Severity::Medium,
        Severity::High,
        Severity::Critical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Severity::ALL
            .into_iter()
            .find(|sev| sev.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown severity `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Maintainability,
    Security,
    Performance,
    Reliability,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Maintainability,
        Category::Security,
        Category::Performance,
        Category::Reliability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Maintainability => "maintainability",
            Category::Security => "security",
            Category::Performance => "performance",
            Category::Reliability => "reliability",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// Multiplier applied to each finding of a given severity when summing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityWeights {
    pub info: f64,
    pub low: f64,
    pub medium: f64,
    pub high: f64,
    pub critical: f64,
}

impl Default for SeverityWeights {
    fn default() -> Self {
        Self {
            info: 0.5,
            low: 1.0,
            medium: 2.5,
            high: 5.0,
            critical: 10.0,
        }
    }
}

impl SeverityWeights {
    pub fn weight(&self, severity: Severity) -> f64 {
        match severity {
            Severity::Info => self.info,
            Severity::Low => self.low,
            Severity::Medium => self.medium,
            Severity::High => self.high,
            Severity::Critical => self.critical,
        }
    }

    /// Weights must be finite, non-negative and non-decreasing in severity.
    pub fn validate(&self) -> Result<(), String> {
        let ws = Severity::ALL.map(|s| self.weight(s));
        if let Some(bad) = ws.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(format!("severity weight {bad} must be finite and non-negative"));
        }
        if ws.windows(2).any(|pair| pair[0] > pair[1]) {
            return Err("severity weights must be non-decreasing from info to critical".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{rule_id}` cannot be reported at severity {severity}")]
    SeverityMismatch { rule_id: String, severity: Severity },
}

/// One detected issue.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: String,
    pub category: Category,
    pub severity: Severity,
    pub cwe_id: Option<String>,
    pub message: String,
    pub span: Span,
    pub file_label: String,
}

impl Finding {
    /// A finding at the rule's registered default severity.
    ///
    /// Panics on an unregistered rule id: that is a bug in the analyzer.
    pub fn new(rule_id: &str, span: Span, message: impl Into<String>) -> Self {
        let rule = registry_lookup(rule_id).unwrap_or_else(|e| panic!("{e}"));
        Self {
            rule_id: rule.rule_id.to_string(),
            category: rule.category,
            severity: rule.default_severity,
            cwe_id: rule.cwe_id.map(str::to_string),
            message: message.into(),
            file_label: span.file_label.clone(),
            span,
        }
    }

    /// Raise severity along the rule's documented escalation.
    pub fn escalated(mut self) -> Self {
        let rule = registry_lookup(&self.rule_id).unwrap_or_else(|e| panic!("{e}"));
        self.severity = rule
            .escalates_to
            .unwrap_or_else(|| panic!("rule {} has no escalation", rule.rule_id));
        self
    }

    /// Checks the registry invariants for this finding.
    pub fn validate(&self) -> Result<(), RegistryError> {
        let rule = registry_lookup(&self.rule_id)?;
        let allowed = self.severity == rule.default_severity
            || Some(self.severity) == rule.escalates_to;
        if allowed && self.category == rule.category {
            Ok(())
        } else {
            Err(RegistryError::SeverityMismatch {
                rule_id: self.rule_id.clone(),
                severity: self.severity,
            })
        }
    }

    fn sort_key(&self) -> impl Ord + '_ {
        (
            &self.file_label,
            self.span.start_line,
            self.span.start_col,
            &self.rule_id,
            self.span.end_line,
            self.span.end_col,
            self.severity,
            &self.message,
        )
    }
}

/// Combine analyzer outputs into one ordered, duplicate-free list.
///
/// Ordering is by file, position, then rule id; findings sharing a rule id
/// and span collapse to one. The result does not depend on the order of
/// `parts`.
pub fn merge_findings(parts: Vec<Vec<Finding>>) -> Vec<Finding> {
    let mut all: Vec<Finding> = parts.into_iter().flatten().collect();
    all.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    all.dedup_by(|b, a| a.rule_id == b.rule_id && a.span == b.span);
    all
}
