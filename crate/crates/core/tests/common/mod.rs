#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::Duration;

use codequal::dataset::Dataset;
use codequal::findings::Finding;
use codequal::reliability::parse_type_report;
use codequal::runner::{PoolOptions, RunnerCommand, RunnerPool};
use codequal::scoring::{Analyzer, QualityReport};

/// A class is flagged for its worst method, and that method carries its own
/// complexity finding.
pub const COMPANIONS: &[(&str, &str)] = &[("MAINT-COMPLEX-CLASS", "MAINT-CYCLOMATIC")];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn problems() -> Dataset {
    Dataset::load(&fixtures().join("problems.jsonl")).expect("problem fixtures load")
}

pub fn fake_runner(mode: &str) -> RunnerCommand {
    let script = fixtures().join("fake_runner.py");
    RunnerCommand { program: "python3".into(), args: vec![script.display().to_string(), mode.into()] }
}

pub fn fast_options(size: usize) -> PoolOptions {
    PoolOptions {
        size,
        acquire_timeout: Duration::from_millis(200),
        handshake_timeout: Duration::from_secs(10),
        ..PoolOptions::default()
    }
}

pub fn fake_pool(mode: &str, size: usize) -> RunnerPool {
    RunnerPool::new(fake_runner(mode), fast_options(size))
}

/// `(rule_id, directory)` for every seeded defect, sorted by rule.
pub fn defect_dirs() -> Vec<(String, PathBuf)> {
    let mut dirs: Vec<_> = std::fs::read_dir(fixtures().join("defects"))
        .expect("defect corpus exists")
        .map(|e| e.expect("readable entry").path())
        .filter(|p| p.is_dir())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    dirs.sort();
    dirs
}

/// Analyze one defect directory, merging its `type_report.txt` if present.
pub fn analyze_defect(dir: &Path) -> QualityReport {
    let mut analyzer = Analyzer::with_defaults();
    let report_path = dir.join("type_report.txt");
    if report_path.exists() {
        let text = std::fs::read_to_string(&report_path).expect("type report readable");
        let entries = parse_type_report(&text).entries;
        analyzer = analyzer.with_external_findings(entries.iter().map(|e| e.to_finding()).collect());
    }
    analyzer.analyze_path(&[dir])
}

/// Checks that a defect fixture reports exactly its rule, once, at the
/// registry severity and CWE. Returns a description of the first mismatch.
pub fn check_defect(rule: &str, report: &QualityReport) -> Result<(), String> {
    let descriptor = codequal::findings::registry_lookup(rule).map_err(|e| e.to_string())?;
    let (hits, others): (Vec<&Finding>, Vec<&Finding>) = report.findings().partition(|f| f.rule_id == rule);
    let unexplained: Vec<_> = others
        .iter()
        .filter(|f| !COMPANIONS.contains(&(rule, f.rule_id.as_str())))
        .map(|f| f.rule_id.as_str())
        .collect();
    if !unexplained.is_empty() {
        return Err(format!("{rule}: unexpected {unexplained:?}"));
    }
    let [hit] = hits.as_slice() else {
        return Err(format!("{rule}: expected one finding, got {}", hits.len()));
    };
    if hit.severity != descriptor.default_severity {
        return Err(format!("{rule}: severity {} != {}", hit.severity, descriptor.default_severity));
    }
    if hit.cwe_id.as_deref() != descriptor.cwe_id {
        return Err(format!("{rule}: cwe {:?} != {:?}", hit.cwe_id, descriptor.cwe_id));
    }
    Ok(())
}
