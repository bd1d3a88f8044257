//! Severity-weighted scoring and analyzer orchestration over files and
//! directories.

mod config;
pub mod curves;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::findings::{merge_findings, rules, Finding, Severity, SeverityWeights};
use crate::pysource::{parse_source, ParseFailure, SourceUnit, Span};
use crate::security::{check_manifest, AdvisoryDb, AdvisoryDbError};
use crate::{maintainability, performance, reliability, security};

pub use config::{merge_json, AnalyzerConfig, ConfigError};

/// Version of the serialized report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// W: the sum of severity weights over all findings.
pub fn weighted_sum(findings: &[Finding], weights: &SeverityWeights) -> f64 {
    SeverityCounts::of(findings).weighted(weights)
}

/// r_quality = 1 / (1 + W).
pub fn quality_score(weighted_sum: f64) -> f64 {
    debug_assert!(weighted_sum >= 0.0, "weighted sum must be non-negative");
    1.0 / (1.0 + weighted_sum)
}

/// Number of findings at each severity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityCounts {
    pub info: usize,
    pub low: usize,
    pub medium: usize,
    pub high: usize,
    pub critical: usize,
}

impl SeverityCounts {
    pub fn of(findings: &[Finding]) -> Self {
        let mut counts = Self::default();
        for f in findings {
            *counts.slot(f.severity) += 1;
        }
        counts
    }

    pub fn get(&self, severity: Severity) -> usize {
        match severity {
            Severity::Info => self.info,
            Severity::Low => self.low,
            Severity::Medium => self.medium,
            Severity::High => self.high,
            Severity::Critical => self.critical,
        }
    }

    fn slot(&mut self, severity: Severity) -> &mut usize {
        match severity {
            Severity::Info => &mut self.info,
            Severity::Low => &mut self.low,
            Severity::Medium => &mut self.medium,
            Severity::High => &mut self.high,
            Severity::Critical => &mut self.critical,
        }
    }

    pub fn total(&self) -> usize {
        Severity::ALL.iter().map(|s| self.get(*s)).sum()
    }

    pub fn weighted(&self, weights: &SeverityWeights) -> f64 {
        Severity::ALL.iter().map(|s| weights.weight(*s) * self.get(*s) as f64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub file_label: String,
    pub findings: Vec<Finding>,
    pub counts: SeverityCounts,
    pub weighted_sum: f64,
    pub score: f64,
}

impl FileReport {
    pub fn new(file_label: impl Into<String>, findings: Vec<Finding>, weights: &SeverityWeights) -> Self {
        let counts = SeverityCounts::of(&findings);
        let weighted_sum = counts.weighted(weights);
        Self {
            file_label: file_label.into(),
            findings,
            counts,
            weighted_sum,
            score: quality_score(weighted_sum),
        }
    }
}

/// A path that could not be analyzed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub schema_version: u32,
    pub config_fingerprint: String,
    pub per_file: Vec<FileReport>,
    /// Mean of per-file scores; 1.0 when nothing was analyzed.
    pub aggregate_score: f64,
    pub warnings: Vec<String>,
    pub errors: Vec<PathError>,
}

impl QualityReport {
    pub fn from_files(mut per_file: Vec<FileReport>, config_fingerprint: String, errors: Vec<PathError>) -> Self {
        per_file.sort_by(|a, b| a.file_label.cmp(&b.file_label));
        let mut warnings = Vec::new();
        let aggregate_score = if per_file.is_empty() {
            warnings.push("no analyzable files found; aggregate score defaults to 1.0".to_string());
            1.0
        } else {
            per_file.iter().map(|f| f.score).sum::<f64>() / per_file.len() as f64
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config_fingerprint,
            per_file,
            aggregate_score,
            warnings,
            errors,
        }
    }

    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.per_file.iter().flat_map(|f| &f.findings)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Whether a file name is analyzed when walking directories.
fn same_file(reported: &str, label: &str) -> bool {
    let (a, b) = (Path::new(reported), Path::new(label));
    reported == label || a.ends_with(b) || b.ends_with(a)
}

pub fn is_analyzable(path: &Path) -> bool {
    let Some(name) = path.file_name().and_then(|n| n.to_str()) else { return false };
    name.ends_with(".py") || is_manifest_name(name)
}

fn is_manifest_name(name: &str) -> bool {
    name.starts_with("requirements") && name.ends_with(".txt")
}

/// A validated configuration plus the resources it refers to.
#[derive(Debug, Clone)]
pub struct Analyzer {
    config: AnalyzerConfig,
    active_rules: BTreeSet<String>,
    advisories: Arc<AdvisoryDb>,
    fingerprint: String,
    external: Vec<Finding>,
}

impl Analyzer {
    pub fn new(config: AnalyzerConfig) -> Result<Self, AnalyzerError> {
        config.validate()?;
        let (advisories, advisory_text) = match &config.advisory_db_path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| AdvisoryDbError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                (Arc::new(AdvisoryDb::parse(&text)?), text)
            }
            None => (Arc::new(AdvisoryDb::bundled().clone()), security::BUNDLED_ADVISORIES.to_string()),
        };
        let active_rules = config.active_rules();
        let fingerprint = fingerprint(&config, &active_rules, &advisory_text);
        Ok(Self {
            config,
            active_rules,
            advisories,
            fingerprint,
            external: Vec::new(),
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(AnalyzerConfig::default()).expect("default config is valid")
    }

    /// Attach findings from an external tool; they join the report entry
    /// whose file label matches, either exactly or as a trailing run of path
    /// components (`pkg/mod.py` matches `/src/pkg/mod.py`).
    pub fn with_external_findings(mut self, findings: Vec<Finding>) -> Self {
        self.external = findings;
        self
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.config
    }

    /// Stable digest of every input that affects findings and scores.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn weights(&self) -> &SeverityWeights {
        &self.config.severity_weights
    }

    /// Analyze a parse result. A parse failure becomes one critical finding.
    pub fn analyze_unit(&self, parsed: &Result<SourceUnit, ParseFailure>) -> FileReport {
        match parsed {
            Ok(unit) => {
                let ((maint, perf), (sec, rel)) = rayon::join(
                    || {
                        rayon::join(
                            || maintainability::analyze(unit, &self.config.maintainability),
                            || performance::analyze(unit, &self.config.performance),
                        )
                    },
                    || {
                        rayon::join(
                            || security::analyze(unit, &self.config.secrets),
                            || reliability::analyze(unit),
                        )
                    },
                );
                self.finish(&unit.file_label, vec![maint, perf, sec, rel])
            }
            Err(failure) => {
                let span = Span::new(failure.file_label.clone(), failure.line, failure.column, failure.line, failure.column);
                let finding = Finding::new(rules::PARSE_ERROR, span, format!("syntax error: {}", failure.message));
                FileReport::new(failure.file_label.clone(), vec![finding], self.weights())
            }
        }
    }

    pub fn analyze_source(&self, file_label: &str, source_text: &str) -> FileReport {
        self.analyze_unit(&parse_source(file_label, source_text))
    }

    pub fn analyze_manifest(&self, file_label: &str, text: &str) -> FileReport {
        self.finish(file_label, vec![check_manifest(file_label, text, &self.advisories)])
    }

    /// Analyze one file's text, choosing the analyzer by file name.
    pub fn analyze_file_text(&self, file_label: &str, text: &str) -> FileReport {
        let name = Path::new(file_label).file_name().and_then(|n| n.to_str()).unwrap_or("");
        if is_manifest_name(name) {
            self.analyze_manifest(file_label, text)
        } else {
            self.analyze_source(file_label, text)
        }
    }

    fn finish(&self, file_label: &str, mut parts: Vec<Vec<Finding>>) -> FileReport {
        let external = self.external.iter().filter(|f| same_file(&f.file_label, file_label));
        parts.push(
            external
                .map(|f| {
                    let mut f = f.clone();
                    f.file_label = file_label.to_string();
                    f.span.file_label = file_label.to_string();
                    f
                })
                .collect(),
        );
        let mut findings = merge_findings(parts);
        findings.retain(|f| self.active_rules.contains(&f.rule_id));
        FileReport::new(file_label, findings, self.weights())
    }

    /// Analyze files and directories. Directories are walked recursively
    /// for `.py` files and `requirements*.txt` manifests, skipping hidden
    /// directories and `__pycache__`. Unreadable paths are recorded in
    /// `errors` and the rest is still analyzed.
    pub fn analyze_path<P: AsRef<Path>>(&self, paths: &[P]) -> QualityReport {
        let mut files = BTreeSet::new();
        let mut errors = Vec::new();
        for root in paths {
            let root = root.as_ref();
            if root.is_file() {
                files.insert(root.to_path_buf());
                continue;
            }
            if !root.is_dir() {
                errors.push(PathError {
                    path: root.display().to_string(),
                    message: "no such file or directory".into(),
                });
                continue;
            }
            let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
                let name = e.file_name().to_string_lossy();
                e.depth() == 0 || !(e.file_type().is_dir() && (name.starts_with('.') || name == "__pycache__"))
            });
            for entry in walker {
                match entry {
                    Ok(e) if e.file_type().is_file() && is_analyzable(e.path()) => {
                        files.insert(e.into_path());
                    }
                    Ok(_) => {}
                    Err(err) => errors.push(PathError {
                        path: err.path().map_or_else(|| root.display().to_string(), |p| p.display().to_string()),
                        message: err.to_string(),
                    }),
                }
            }
        }
        let results: Vec<Result<FileReport, PathError>> = files
            .par_iter()
            .map(|path| {
                let label = path.display().to_string();
                std::fs::read_to_string(path)
                    .map(|text| self.analyze_file_text(&label, &text))
                    .map_err(|e| PathError { path: label, message: e.to_string() })
            })
            .collect();
        let mut per_file = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok(report) => per_file.push(report),
                Err(e) => errors.push(e),
            }
        }
        errors.sort_by(|a, b| a.path.cmp(&b.path));
        QualityReport::from_files(per_file, self.fingerprint.clone(), errors)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnalyzerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Advisories(#[from] AdvisoryDbError),
}

fn fingerprint(config: &AnalyzerConfig, active_rules: &BTreeSet<String>, advisory_text: &str) -> String {
    // The advisory path is replaced by a digest of its content so that the
    // same database at a different location fingerprints identically.
    let resolved = serde_json::json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "severity_weights": config.severity_weights,
        "maintainability": config.maintainability,
        "performance": config.performance,
        "secrets": config.secrets,
        "active_rules": active_rules,
        "advisories_sha256": hex(&Sha256::digest(advisory_text.as_bytes())),
    });
    format!("sha256:{}", hex(&Sha256::digest(resolved.to_string().as_bytes())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
