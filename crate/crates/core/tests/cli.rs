mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use common::fixtures;

fn codequal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codequal"))
        .current_dir(fixtures())
        .env_remove("CODEQUAL_TESTRUNNER")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_lines(output: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&output.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}")))
        .collect()
}

fn runner_arg() -> String {
    format!("python3 {}", fixtures().join("fake_runner.py").display())
}

#[test]
fn clean_tree_passes_a_strict_threshold() {
    let out = codequal(&["analyze", "clean", "--min-score", "1.0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("aggregate score 1.0000"));
}

#[test]
fn threshold_failure_exits_one() {
    let out = codequal(&["analyze", "defects/SEC-PICKLE", "--min-score", "0.5", "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    // One high finding: W = 5.
    assert_eq!(report["aggregate_score"], 1.0 / 6.0);
    assert_eq!(report["per_file"][0]["findings"][0]["cwe_id"], "CWE-502");
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(codequal(&["analyze"]).status.code(), Some(2));
    assert_eq!(codequal(&["analyze", "clean", "--min-score", "2"]).status.code(), Some(2));
    assert_eq!(codequal(&["rules", "--category", "style"]).status.code(), Some(2));
    assert_eq!(codequal(&["analyze", "no/such/dir"]).status.code(), Some(3));
    let bad_config = codequal(&["--config", "problems.jsonl", "analyze", "clean"]);
    assert_eq!(bad_config.status.code(), Some(2));
    assert!(!bad_config.stderr.is_empty());
}

#[test]
fn config_file_changes_weights_and_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("codequal.toml");
    std::fs::write(&config, "[analyzer.severity_weights]\nhigh = 9.0\n").unwrap();
    let base = codequal(&["analyze", "defects/SEC-PICKLE", "--format", "json"]);
    let tuned = codequal(&["--config", config.to_str().unwrap(), "analyze", "defects/SEC-PICKLE", "--format", "json"]);
    let base: Value = serde_json::from_slice(&base.stdout).unwrap();
    let tuned: Value = serde_json::from_slice(&tuned.stdout).unwrap();
    assert_eq!(tuned["aggregate_score"], 0.1);
    assert_ne!(base["config_fingerprint"], tuned["config_fingerprint"]);
}

#[test]
fn type_report_findings_join_the_report() {
    let out = codequal(&[
        "analyze",
        "defects/REL-EXTERNAL-TYPE",
        "--format",
        "json",
        "--type-report",
        "defects/REL-EXTERNAL-TYPE/type_report.txt",
    ]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let finding = &report["per_file"][0]["findings"][0];
    assert_eq!(finding["rule_id"], "REL-EXTERNAL-TYPE");
    assert_eq!(finding["span"]["start_line"], 3);
    assert_eq!(codequal(&["analyze", "clean", "--type-report", "missing.txt"]).status.code(), Some(3));
}

#[test]
fn rules_catalog() {
    let out = codequal(&["rules", "--format", "json", "--category", "security"]);
    let rules: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rules.len(), 11);
    assert!(rules.iter().all(|r| r["category"] == "security"));
    let text = String::from_utf8(codequal(&["rules"]).stdout).unwrap();
    assert_eq!(text.lines().count(), codequal::findings::registry().len());
}

#[test]
fn reward_without_runner_flags_correctness() {
    let out = codequal(&["reward", "--problems", "problems.jsonl", "--completions", "completions.jsonl", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out);
    let (summary, rows) = lines.split_last().unwrap();
    let ideal = &rows[0]["breakdown"];
    assert_eq!(rows[0]["rollout_id"], "two-sum-ideal");
    assert_eq!(ideal["r_format"], 1.0);
    assert_eq!(ideal["r_quality"], 1.0);
    assert_eq!(ideal["correctness"]["status"], "unavailable");
    assert_eq!(ideal["r_total"], 0.7);
    // Prose-only rollouts have no code, which is measured, not unavailable.
    assert_eq!(summary["summary"]["correctness_unavailable"], 5);
    assert_eq!(summary["summary"]["scored"], 7);
}

#[test]
fn renormalized_policy_rescales() {
    let out = codequal(&[
        "reward",
        "--problems",
        "problems.jsonl",
        "--completions",
        "completions.jsonl",
        "--format",
        "json",
        "--unavailable",
        "renormalize",
    ]);
    let lines = json_lines(&out);
    assert_eq!(lines[0]["breakdown"]["r_total"], 1.0);
}

#[test]
fn reward_with_runner_measures_and_groups() {
    let runner = runner_arg();
    let out = codequal(&[
        "reward",
        "--problems",
        "problems.jsonl",
        "--completions",
        "completions.jsonl",
        "--format",
        "json",
        "--runner",
        &runner,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out);
    let (summary, rows) = lines.split_last().unwrap();
    assert_eq!(summary["summary"]["correctness_unavailable"], 0);
    assert_eq!(rows[0]["breakdown"]["r_correct"], 1.0);
    assert_eq!(rows[0]["breakdown"]["r_total"], 1.0);
    // Each consecutive run of a `group` value is standardized on its own.
    let group: Vec<f64> = rows[0..3].iter().map(|r| r["advantage"].as_f64().unwrap()).collect();
    assert!(group.iter().sum::<f64>().abs() < 1e-9);
    assert!(group[0] > group[1] && group[1] > group[2]);
    // A singleton group has zero spread.
    assert_eq!(rows[6]["advantage"], 0.0);
}

#[test]
fn malformed_rows_are_reported_inline() {
    let dir = tempfile::tempdir().unwrap();
    let completions = dir.path().join("c.jsonl");
    std::fs::write(
        &completions,
        "{\"rollout_id\":\"a\",\"problem_id\":\"fizzbuzz\",\"completion\":\"```python\\nx = 1\\n```\"}\nnot json\n{\"rollout_id\":\"b\",\"problem_id\":\"nope\",\"completion\":\"\"}\n",
    )
    .unwrap();
    let problems = fixtures().join("problems.jsonl");
    let out = codequal(&[
        "reward",
        "--problems",
        problems.to_str().unwrap(),
        "--completions",
        completions.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let lines = json_lines(&out);
    assert!(lines[0]["breakdown"].is_object());
    assert!(lines[1]["error"].as_str().unwrap().starts_with("line 2"));
    assert!(lines[2]["error"].as_str().unwrap().contains("nope"));
    assert_eq!(lines[3]["summary"]["errors"], 2);
}

#[test]
fn malformed_problem_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let problems = dir.path().join("p.jsonl");
    std::fs::write(&problems, "{\"problem_id\": \"x\"}\n").unwrap();
    let out = codequal(&["reward", "--problems", problems.to_str().unwrap(), "--completions", "completions.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let missing = Path::new("absent.jsonl");
    let out = codequal(&["reward", "--problems", missing.to_str().unwrap(), "--completions", "completions.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
}
