//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use codequal::findings::{rules, Finding, Severity, SeverityWeights};
use codequal::interface::{Engine, Settings};
use codequal::pysource::Span;
use codequal::reward::{combined_reward, group_advantages, Correctness, RewardComponents, RewardWeights, RolloutScorer, TestExecutor};
use codequal::runner::{RunnerCommand, RunnerPool};
use codequal::scoring::curves::{render_svg, score_curves};
use codequal::scoring::{quality_score, weighted_sum, Analyzer};
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("score-formula", score_formula),
        ("score-curves", score_curve_shape),
        ("golden-corpus", golden_corpus),
        ("reward-mix", reward_mix),
        ("advantages", advantages),
        ("latency", latency),
        ("determinism", determinism),
        ("dataset-consistency", dataset_consistency),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.2}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2}s): {reason}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if condition {
        Ok(())
    } else {
        Err(message())
    }
}

fn proptest_runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

// ---------------------------------------------------------------------------

/// One rule per severity, at its registered default.
const RULE_AT: [(Severity, &str); 5] = [
    (Severity::Info, rules::MAINT_MISSING_DOCSTRING),
    (Severity::Low, rules::MAINT_NAMING),
    (Severity::Medium, rules::MAINT_TOO_MANY_ARGS),
    (Severity::High, rules::SEC_PICKLE),
    (Severity::Critical, rules::SEC_HARDCODED_SECRET),
];

fn findings_with(counts: [usize; 5]) -> Vec<Finding> {
    let mut out = Vec::new();
    for ((_, rule), n) in RULE_AT.iter().zip(counts) {
        for i in 0..n {
            out.push(Finding::new(rule, Span::line("m.py", i + 1), "synthetic"));
        }
    }
    out
}

/// Severity weights as exact fractions: 1/2, 1, 5/2, 5, 10.
fn exact_weights() -> [Ratio<i64>; 5] {
    [Ratio::new(1, 2), Ratio::from(1), Ratio::new(5, 2), Ratio::from(5), Ratio::from(10)]
}

fn exact_score(counts: [usize; 5]) -> Ratio<i64> {
    let w: Ratio<i64> = exact_weights().iter().zip(counts).map(|(w, n)| w * n as i64).sum();
    Ratio::from(1) / (Ratio::from(1) + w)
}

fn check_score(counts: [usize; 5], expected: Ratio<i64>) -> Result<(), String> {
    let weights = SeverityWeights::default();
    let findings = findings_with(counts);
    let w = weighted_sum(&findings, &weights);
    let exact_w = Ratio::from(1) / expected - Ratio::from(1);
    ensure(Ratio::<i64>::approximate_float(w) == Some(exact_w), || format!("{counts:?}: W = {w}, oracle {exact_w}"))?;
    let score = quality_score(w);
    let oracle = *expected.numer() as f64 / *expected.denom() as f64;
    ensure((score - oracle).abs() <= 1e-12, || format!("{counts:?}: score {score}, oracle {expected}"))
}

fn score_formula() -> Outcome {
    // [info, low, medium, high, critical] -> 1 / (1 + W), worked by hand.
    let hand: [([usize; 5], (i64, i64)); 22] = [
        ([0, 0, 0, 0, 0], (1, 1)),
        ([1, 0, 0, 0, 0], (2, 3)),
        ([0, 1, 0, 0, 0], (1, 2)),
        ([0, 0, 1, 0, 0], (2, 7)),
        ([0, 0, 0, 1, 0], (1, 6)),
        ([0, 0, 0, 0, 1], (1, 11)),
        ([2, 0, 0, 0, 0], (1, 2)),
        ([0, 3, 0, 0, 0], (1, 4)),
        ([0, 0, 2, 0, 0], (1, 6)),
        ([0, 0, 0, 2, 0], (1, 11)),
        ([0, 0, 0, 0, 2], (1, 21)),
        ([1, 1, 1, 1, 1], (2, 40)),
        ([3, 0, 0, 0, 0], (2, 5)),
        ([0, 0, 4, 0, 0], (1, 11)),
        ([1, 0, 1, 0, 0], (1, 4)),
        ([0, 2, 0, 1, 0], (1, 8)),
        ([0, 0, 0, 1, 1], (1, 16)),
        ([4, 4, 0, 0, 0], (1, 7)),
        ([0, 1, 1, 1, 0], (2, 19)),
        ([5, 0, 0, 0, 1], (2, 27)),
        ([0, 0, 3, 0, 0], (2, 17)),
        ([10, 10, 10, 10, 10], (1, 191)),
    ];
    for (counts, (n, d)) in hand {
        let expected = Ratio::new(n, d);
        ensure(exact_score(counts) == expected, || format!("{counts:?}: hand value {expected} disagrees with oracle"))?;
        check_score(counts, expected)?;
    }
    let mut runner = proptest_runner(200);
    runner
        .run(&prop::array::uniform5(0usize..30), |counts| {
            check_score(counts, exact_score(counts)).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{} hand-computed and 200 generated multisets match the rational oracle", hand.len()))
}

// ---------------------------------------------------------------------------

fn score_curve_shape() -> Outcome {
    let curves = score_curves(&SeverityWeights::default(), 20);
    for curve in &curves {
        ensure(curve.scores.len() == 21 && curve.scores[0] == 1.0, || format!("{}: bad start", curve.severity))?;
        for n in 1..curve.scores.len() {
            ensure(curve.scores[n] < curve.scores[n - 1], || format!("{} not strictly decreasing at N={n}", curve.severity))?;
        }
    }
    for n in 1..=20 {
        for pair in curves.windows(2) {
            ensure(pair[0].scores[n] > pair[1].scores[n], || {
                format!("N={n}: {} does not score above {}", pair[0].severity, pair[1].severity)
            })?;
        }
    }
    let artifact = artifact_dir().join("score_curves.svg");
    std::fs::write(&artifact, render_svg(&curves)).map_err(|e| e.to_string())?;
    Ok(format!("5 severities x N=0..20 strictly decreasing and ordered; plot at {}", artifact.display()))
}

fn artifact_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("artifact dir");
    dir
}

// ---------------------------------------------------------------------------

fn golden_corpus() -> Outcome {
    let dirs = common::defect_dirs();
    ensure(dirs.len() >= 25, || format!("only {} fixtures", dirs.len()))?;
    let failures: Vec<String> =
        dirs.iter().filter_map(|(rule, dir)| common::check_defect(rule, &common::analyze_defect(dir)).err()).collect();
    ensure(failures.is_empty(), || failures.join("; "))?;
    let clean = Analyzer::with_defaults().analyze_path(&[common::fixtures().join("clean")]);
    let stray: Vec<String> = clean.findings().map(|f| format!("{} {}", f.file_label, f.rule_id)).collect();
    ensure(stray.is_empty(), || format!("clean corpus findings: {}", stray.join(", ")))?;
    Ok(format!("{} rule fixtures exact; {} clean files with zero findings", dirs.len(), clean.per_file.len()))
}

// ---------------------------------------------------------------------------

fn reward_mix() -> Outcome {
    let weights = RewardWeights::default();
    let steps: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    let mut points = 0;
    for &format in &steps {
        for &correct in &steps {
            for &quality in &steps {
                let r = combined_reward(RewardComponents { format, correct, quality }, &weights);
                let oracle = (2.0 * format + 3.0 * correct + 5.0 * quality) / 10.0;
                ensure((r - oracle).abs() <= 1e-12, || format!("({format}, {correct}, {quality}): {r} vs {oracle}"))?;
                points += 1;
            }
        }
    }
    let unit = || 0.0..=1.0f64;
    let mut runner = proptest_runner(1000);
    runner
        .run(&(unit(), unit(), unit(), 0usize..3, 1e-6..1.0f64), |(f, c, q, which, bump)| {
            let base = RewardComponents { format: f, correct: c, quality: q };
            let mut raised = base;
            let slot = match which {
                0 => &mut raised.format,
                1 => &mut raised.correct,
                _ => &mut raised.quality,
            };
            *slot = (*slot + bump).min(1.0);
            let (r0, r1) = (combined_reward(base, &weights), combined_reward(raised, &weights));
            prop_assert!((0.0..=1.0).contains(&r0));
            prop_assert!(r1 >= r0, "raising component {} lowered the reward", which);
            if raised != base {
                prop_assert!(r1 > r0);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{points} grid points within 1e-12; 1000 monotonicity cases"))
}

// ---------------------------------------------------------------------------

fn advantages() -> Outcome {
    let groups = (2usize..=16).prop_flat_map(|g| prop::collection::vec(0.0..1.0f64, g)).prop_filter("non-constant", |r| {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        r.iter().any(|x| (x - mean).abs() > 1e-6)
    });
    let mut runner = proptest_runner(1000);
    runner
        .run(&groups, |rewards| {
            let a = group_advantages(&rewards);
            let n = a.len() as f64;
            let mean = a.iter().sum::<f64>() / n;
            let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() <= 1e-9, "mean {}", mean);
            prop_assert!((std - 1.0).abs() <= 1e-9, "std {}", std);
            for i in 0..rewards.len() {
                for j in 0..rewards.len() {
                    if rewards[i] < rewards[j] {
                        prop_assert!(a[i] < a[j], "order lost at ({}, {})", i, j);
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let mut runner = proptest_runner(200);
    runner
        .run(&(2usize..=16, -5.0..5.0f64), |(g, value)| {
            prop_assert!(group_advantages(&vec![value; g]).iter().all(|&x| x == 0.0));
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // Rounding in the shifted rewards is amplified by 1/std, so the groups
    // here keep a spread of at least 1e-3.
    let spread_groups = prop::collection::vec(0.0..1.0f64, 2..=16).prop_filter("spread", |r| {
        let m = r.iter().sum::<f64>() / r.len() as f64;
        (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / r.len() as f64).sqrt() > 1e-3
    });
    let mut runner = proptest_runner(1000);
    runner
        .run(&(spread_groups, 0.01..100.0f64, -10.0..10.0f64), |(rewards, scale, shift)| {
            let base = group_advantages(&rewards);
            for transformed in [rewards.iter().map(|r| r + shift).collect::<Vec<_>>(), rewards.iter().map(|r| r * scale).collect()] {
                for (x, y) in base.iter().zip(group_advantages(&transformed)) {
                    prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 groups (G 2..16) standardized with order kept; constant groups zero; 1000 shift/scale cases within 1e-9".into())
}

// ---------------------------------------------------------------------------

fn snippets() -> Vec<(String, String)> {
    let mut out = Vec::new();
    let fixtures = common::fixtures();
    for entry in walk_py(&fixtures.join("defects")).into_iter().chain(walk_py(&fixtures.join("clean"))) {
        let text = std::fs::read_to_string(&entry).expect("fixture readable");
        if text.lines().count() <= 200 {
            out.push((entry.display().to_string(), text));
        }
    }
    for record in common::problems().records() {
        out.push((record.problem_id.clone(), record.ideal_solution.clone()));
    }
    // A dense 200-line module exercising every analyzer family.
    let mut dense = String::from("\"\"\"Synthetic module.\"\"\"\nimport os\nimport threading\n\nLOCK = threading.Lock()\n\n");
    let mut i = 0;
    while dense.lines().count() < 190 {
        dense.push_str(&format!(
            "\ndef step_{i}(items: list, limit: int) -> str:\n    \"\"\"Step {i}.\"\"\"\n    out = \"\"\n    for item in items:\n        if item > limit:\n            out += str(item)\n    return out\n"
        ));
        i += 1;
    }
    out.push(("synthetic-200".into(), dense.lines().take(200).collect::<Vec<_>>().join("\n") + "\n"));
    out
}

fn walk_py(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "py") {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

fn latency() -> Outcome {
    let scorer = RolloutScorer::new(Analyzer::with_defaults());
    let snippets = snippets();
    let mut samples = Vec::new();
    for _ in 0..5 {
        for (_, code) in &snippets {
            let completion = format!("```python\n{code}```\n");
            let started = Instant::now();
            let breakdown = scorer.score(&completion, None);
            samples.push(started.elapsed().as_secs_f64());
            ensure(breakdown.quality_report.is_some(), || "snippet was not analyzed".into())?;
        }
    }
    samples.sort_by(f64::total_cmp);
    let pct = |p: f64| samples[((samples.len() - 1) as f64 * p).round() as usize] * 1e3;
    let (p50, p95, max) = (pct(0.5), pct(0.95), samples[samples.len() - 1] * 1e3);
    let build = if cfg!(debug_assertions) { "debug" } else { "release" };
    ensure(p50 < 1000.0, || format!("p50 {p50:.2} ms"))?;
    Ok(format!(
        "{} runs over {} snippets (<=200 lines, {build} build): p50 {p50:.2} ms, p95 {p95:.2} ms, max {max:.2} ms",
        samples.len(),
        snippets.len()
    ))
}

// ---------------------------------------------------------------------------

fn determinism() -> Outcome {
    let roots = [common::fixtures().join("defects"), common::fixtures().join("clean")];
    let a = Analyzer::with_defaults().analyze_path(&roots).to_json();
    let b = Analyzer::with_defaults().analyze_path(&roots).to_json();
    ensure(a == b, || "library reports differ between runs".into())?;
    let cli = || {
        Command::new(env!("CARGO_BIN_EXE_codequal"))
            .current_dir(common::fixtures())
            .args(["analyze", "defects", "clean", "--format", "json"])
            .output()
            .map(|o| o.stdout)
            .map_err(|e| e.to_string())
    };
    let (c, d) = (cli()?, cli()?);
    ensure(!c.is_empty() && c == d, || "CLI reports differ between runs".into())?;
    Ok(format!("library and CLI reports byte-identical across runs ({} bytes)", a.len()))
}

// ---------------------------------------------------------------------------

fn dataset_consistency() -> Outcome {
    let dataset = common::problems();
    let (command, source) = match RunnerCommand::from_env() {
        Some(c) => (c, "CODEQUAL_TESTRUNNER"),
        None => (common::fake_runner("ok"), "protocol test double"),
    };
    let pool: Arc<dyn TestExecutor> = Arc::new(RunnerPool::new(command, common::fast_options(2)));
    let engine = Engine::new(Settings::default(), Some(pool)).map_err(|e| e.to_string())?;
    for record in dataset.records() {
        let completion = format!("```python\n{}```\n", record.ideal_solution);
        let b = engine.score(&completion, Some(record));
        ensure(b.correctness == Correctness::Measured && b.r_correct == 1.0, || {
            format!("{}: r_correct {} ({:?})", record.problem_id, b.r_correct, b.correctness)
        })?;
    }

    // Without any runner, through the CLI.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let completions = dir.path().join("ideal.jsonl");
    let rows: Vec<String> = dataset
        .records()
        .iter()
        .map(|r| {
            serde_json::json!({
                "rollout_id": r.problem_id,
                "problem_id": r.problem_id,
                "completion": format!("```python\n{}```\n", r.ideal_solution),
            })
            .to_string()
        })
        .collect();
    std::fs::write(&completions, rows.join("\n")).map_err(|e| e.to_string())?;
    let output = Command::new(env!("CARGO_BIN_EXE_codequal"))
        .env_remove("CODEQUAL_TESTRUNNER")
        .arg("reward")
        .arg("--problems")
        .arg(common::fixtures().join("problems.jsonl"))
        .arg("--completions")
        .arg(&completions)
        .args(["--format", "json"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(output.status.success(), || String::from_utf8_lossy(&output.stderr).into_owned())?;
    let lines: Vec<serde_json::Value> =
        String::from_utf8_lossy(&output.stdout).lines().filter_map(|l| serde_json::from_str(l).ok()).collect();
    let rows = &lines[..lines.len().saturating_sub(1)];
    ensure(rows.len() == dataset.len(), || format!("{} rows for {} problems", rows.len(), dataset.len()))?;
    for row in rows {
        let b = &row["breakdown"];
        ensure(
            b["r_format"] == 1.0 && b["r_quality"].is_f64() && b["correctness"]["status"] == "unavailable",
            || format!("{}: {b}", row["rollout_id"]),
        )?;
    }
    Ok(format!(
        "{} problems: r_correct 1.0 via {source}; without a runner the CLI reports r_format/r_quality and flags r_correct unavailable",
        dataset.len()
    ))
}
