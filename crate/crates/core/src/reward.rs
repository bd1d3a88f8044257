//! Reward composition for coding rollouts and group-relative advantages.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::ProblemRecord;
use crate::pysource::{extract_code_blocks, CodeBlock};
use crate::scoring::{Analyzer, FileReport};

/// File label given to the code block extracted from a completion.
pub const SOLUTION_LABEL: &str = "solution.py";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub format: f64,
    pub correct: f64,
    pub quality: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            format: 0.2,
            correct: 0.3,
            quality: 0.5,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        let ws = [self.format, self.correct, self.quality];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err("reward weights must be finite and non-negative".into());
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("reward weights must sum to 1, got {sum}"));
        }
        Ok(())
    }
}

/// Format reward for each shape of completion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormatPolicy {
    pub single_complete: f64,
    pub single_incomplete: f64,
    pub multiple: f64,
    pub none: f64,
}

impl Default for FormatPolicy {
    fn default() -> Self {
        Self {
            single_complete: 1.0,
            single_incomplete: 0.25,
            multiple: 0.25,
            none: 0.0,
        }
    }
}

fn candidates(completion: &str) -> Vec<CodeBlock> {
    extract_code_blocks(completion).into_iter().filter(CodeBlock::is_python_candidate).collect()
}

pub fn format_reward(completion: &str) -> f64 {
    format_reward_with(completion, &FormatPolicy::default())
}

pub fn format_reward_with(completion: &str, policy: &FormatPolicy) -> f64 {
    match candidates(completion).as_slice() {
        [] => policy.none,
        [one] if one.complete => policy.single_complete,
        [_] => policy.single_incomplete,
        _ => policy.multiple,
    }
}

/// The block that quality and correctness are measured on: the first
/// complete candidate, else the first incomplete one.
pub fn solution_block(completion: &str) -> Option<CodeBlock> {
    let blocks = candidates(completion);
    let first_complete = blocks.iter().position(|b| b.complete);
    let chosen = first_complete.unwrap_or(0);
    blocks.into_iter().nth(chosen)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCaseResult {
    pub name: String,
    pub passed: bool,
    #[serde(default)]
    pub message: String,
}

/// Outcome of running a problem's held-out tests against a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub total_tests: u32,
    pub passed: u32,
    pub errored: bool,
    pub timed_out: bool,
    #[serde(default)]
    pub per_test: Vec<TestCaseResult>,
    #[serde(default)]
    pub duration_seconds: f64,
}

pub fn correctness_reward(report: &TestReport) -> f64 {
    if report.total_tests == 0 || report.errored || report.timed_out {
        return 0.0;
    }
    f64::from(report.passed.min(report.total_tests)) / f64::from(report.total_tests)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub format: f64,
    pub correct: f64,
    pub quality: f64,
}

/// r = w_format·r_format + w_correct·r_correct + w_quality·r_quality.
pub fn combined_reward(c: RewardComponents, w: &RewardWeights) -> f64 {
    w.format * c.format + w.correct * c.correct + w.quality * c.quality
}

/// Group-relative advantages: (r_i - mean) / std with the population
/// standard deviation. A group whose std is below 1e-8 gets all zeros.
pub fn group_advantages(rewards: &[f64]) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-8 {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - mean) / std).collect()
}

/// Why tests could not be run.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ExecutorError {
    pub message: String,
    /// The same request may succeed later (for example, all workers busy).
    pub retryable: bool,
}

impl ExecutorError {
    pub fn fatal(message: impl Into<String>) -> Self {
        Self { message: message.into(), retryable: false }
    }
}

/// Runs held-out tests for a candidate solution.
pub trait TestExecutor: Send + Sync {
    fn run_tests(&self, solution_code: &str, test_code: &str) -> Result<TestReport, ExecutorError>;
}

/// How r_correct enters the total when it could not be measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnavailablePolicy {
    /// Count it as 0.
    #[default]
    Zero,
    /// Drop it and rescale the remaining weights to sum to 1.
    Renormalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Correctness {
    Measured,
    /// No candidate code block; correctness is 0 by definition.
    NoCode,
    Unavailable {
        reason: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        retryable: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_correct: f64,
    pub r_quality: f64,
    pub r_total: f64,
    pub correctness: Correctness,
    pub quality_report: Option<FileReport>,
    pub test_report: Option<TestReport>,
}

/// Everything needed to score a rollout.
#[derive(Clone)]
pub struct RolloutScorer {
    pub analyzer: Analyzer,
    pub weights: RewardWeights,
    pub format_policy: FormatPolicy,
    pub executor: Option<Arc<dyn TestExecutor>>,
    pub unavailable: UnavailablePolicy,
}

impl RolloutScorer {
    pub fn new(analyzer: Analyzer) -> Self {
        Self {
            analyzer,
            weights: RewardWeights::default(),
            format_policy: FormatPolicy::default(),
            executor: None,
            unavailable: UnavailablePolicy::default(),
        }
    }

    pub fn with_executor(mut self, executor: Arc<dyn TestExecutor>) -> Self {
        self.executor = Some(executor);
        self
    }

    pub fn score(&self, completion: &str, problem: Option<&ProblemRecord>) -> RewardBreakdown {
        let r_format = format_reward_with(completion, &self.format_policy);
        let Some(block) = solution_block(completion) else {
            return RewardBreakdown {
                r_format,
                r_correct: 0.0,
                r_quality: 0.0,
                r_total: combined_reward(RewardComponents { format: r_format, correct: 0.0, quality: 0.0 }, &self.weights),
                correctness: Correctness::NoCode,
                quality_report: None,
                test_report: None,
            };
        };
        let quality = self.analyzer.analyze_source(SOLUTION_LABEL, &block.body);
        let r_quality = quality.score;

        let run = match (problem, &self.executor) {
            (None, _) => Err(ExecutorError::fatal("no problem record given")),
            (Some(p), _) if p.test_code.trim().is_empty() => {
                Err(ExecutorError::fatal(format!("problem `{}` has no tests", p.problem_id)))
            }
            (Some(_), None) => Err(ExecutorError::fatal("test runner not configured")),
            (Some(p), Some(exec)) => exec.run_tests(&block.body, &p.test_code),
        };
        let (r_correct, correctness, test_report) = match run {
            Ok(report) => (correctness_reward(&report), Correctness::Measured, Some(report)),
            Err(e) => (0.0, Correctness::Unavailable { reason: e.message, retryable: e.retryable }, None),
        };

        let components = RewardComponents { format: r_format, correct: r_correct, quality: r_quality };
        let r_total = match (&correctness, self.unavailable) {
            (Correctness::Unavailable { .. }, UnavailablePolicy::Renormalize) => {
                let rest = self.weights.format + self.weights.quality;
                if rest > 0.0 {
                    (self.weights.format * r_format + self.weights.quality * r_quality) / rest
                } else {
                    0.0
                }
            }
            _ => combined_reward(components, &self.weights),
        };
        RewardBreakdown {
            r_format,
            r_correct,
            r_quality,
            r_total,
            correctness,
            quality_report: Some(quality),
            test_report,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ONE_BLOCK: &str = "Here:\n```python\ndef add(a: int, b: int) -> int:\n    \"\"\"Add.\"\"\"\n    return a + b\n```\n";

    struct Fixed(TestReport);

    impl TestExecutor for Fixed {
        fn run_tests(&self, _: &str, _: &str) -> Result<TestReport, ExecutorError> {
            Ok(self.0.clone())
        }
    }

    fn report(total: u32, passed: u32) -> TestReport {
        TestReport { total_tests: total, passed, errored: false, timed_out: false, per_test: vec![], duration_seconds: 0.0 }
    }

    fn problem() -> ProblemRecord {
        ProblemRecord {
            problem_id: "p".into(),
            difficulty: "easy".into(),
            statement: String::new(),
            initial_code: String::new(),
            ideal_solution: String::new(),
            test_code: "def test_add():\n    assert add(1, 2) == 3\n".into(),
        }
    }

    #[test]
    fn format_table() {
        assert_eq!(format_reward(ONE_BLOCK), 1.0);
        assert_eq!(format_reward(&format!("{ONE_BLOCK}{ONE_BLOCK}")), 0.25);
        assert_eq!(format_reward("```python\nx = 1\n"), 0.25);
        assert_eq!(format_reward("plain prose"), 0.0);
        assert_eq!(format_reward("```rust\nfn main() {}\n```\n"), 0.0);
        assert_eq!(format_reward("```rust\nfn main() {}\n```\n```py\nx = 1\n```\n"), 1.0);
    }

    #[test]
    fn correctness_examples() {
        assert_eq!(correctness_reward(&report(5, 5)), 1.0);
        assert_eq!(correctness_reward(&report(8, 0)), 0.0);
        assert_eq!(correctness_reward(&report(4, 3)), 0.75);
        assert_eq!(correctness_reward(&report(0, 0)), 0.0);
        assert_eq!(correctness_reward(&TestReport { errored: true, ..report(4, 3) }), 0.0);
        assert_eq!(correctness_reward(&TestReport { timed_out: true, ..report(4, 4) }), 0.0);
    }

    #[test]
    fn combined_examples() {
        let w = RewardWeights::default();
        let c = |format, correct, quality| RewardComponents { format, correct, quality };
        assert!((combined_reward(c(1.0, 1.0, 1.0), &w) - 1.0).abs() < 1e-12);
        assert!((combined_reward(c(1.0, 0.5, 0.766), &w) - 0.733).abs() < 1e-12);
        assert_eq!(combined_reward(c(0.0, 0.0, 0.0), &w), 0.0);
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(group_advantages(&[1.0, 0.0]), [1.0, -1.0]);
        assert_eq!(group_advantages(&[0.7, 0.7, 0.7]), [0.0, 0.0, 0.0]);
        let a = group_advantages(&[0.2, 0.5, 0.8]);
        let expected = 0.3 / 0.06f64.sqrt();
        assert!((a[0] + expected).abs() < 1e-12 && a[1].abs() < 1e-12 && (a[2] - expected).abs() < 1e-12);
        assert_eq!(group_advantages(&[0.4]), [0.0]);
    }

    #[test]
    fn rollout_examples() {
        let scorer = RolloutScorer::new(Analyzer::with_defaults());
        let passing = scorer.clone().with_executor(Arc::new(Fixed(report(3, 3))));
        let failing = scorer.clone().with_executor(Arc::new(Fixed(report(3, 0))));
        assert_eq!(passing.score(ONE_BLOCK, Some(&problem())).r_total, 1.0);
        let b = failing.score(ONE_BLOCK, Some(&problem()));
        assert!((b.r_total - 0.7).abs() < 1e-12);
        let none = passing.score("no code here", Some(&problem()));
        assert_eq!((none.r_total, none.correctness), (0.0, Correctness::NoCode));
    }

    #[test]
    fn unavailable_runner_policies() {
        let scorer = RolloutScorer::new(Analyzer::with_defaults());
        let b = scorer.score(ONE_BLOCK, Some(&problem()));
        assert!(matches!(b.correctness, Correctness::Unavailable { .. }));
        assert!((b.r_total - 0.7).abs() < 1e-12);
        let renorm = RolloutScorer { unavailable: UnavailablePolicy::Renormalize, ..scorer };
        assert!((renorm.score(ONE_BLOCK, None).r_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_complete_block_is_scored() {
        let text = "```python\nimport os\n```\n```python\nx = 1\n```\n";
        assert_eq!(solution_block(text).unwrap().body, "import os");
        let text = "```python\ndef f(:\n";
        assert!(!solution_block(text).unwrap().complete);
    }

    fn rank_consistent(r: &[f64], a: &[f64]) -> bool {
        (0..r.len()).all(|i| (0..r.len()).all(|j| r[i].partial_cmp(&r[j]) == a[i].partial_cmp(&a[j])))
    }

    proptest! {
        #[test]
        fn advantages_standardize(rewards in proptest::collection::vec(0.0f64..1.0, 2..=16)) {
            let n = rewards.len() as f64;
            let mean = rewards.iter().sum::<f64>() / n;
            let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assume!(std >= 1e-6);
            let a = group_advantages(&rewards);
            let a_mean = a.iter().sum::<f64>() / n;
            let a_std = (a.iter().map(|x| (x - a_mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(a_mean.abs() <= 1e-9);
            prop_assert!((a_std - 1.0).abs() <= 1e-9);
            prop_assert!(rank_consistent(&rewards, &a));
        }

        #[test]
        fn advantages_affine_invariant(rewards in proptest::collection::vec(0.0f64..1.0, 2..=16), shift in -10.0f64..10.0, scale in 0.1f64..10.0) {
            let base = group_advantages(&rewards);
            let moved: Vec<f64> = rewards.iter().map(|r| r * scale + shift).collect();
            let std = {
                let n = rewards.len() as f64;
                let m = rewards.iter().sum::<f64>() / n;
                (rewards.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n).sqrt()
            };
            prop_assume!(std >= 1e-6);
            for (x, y) in base.iter().zip(group_advantages(&moved)) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn combined_is_monotone_and_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, bump in 0.0f64..=1.0) {
            let w = RewardWeights::default();
            let base = RewardComponents { format: a, correct: b, quality: c };
            let r = combined_reward(base, &w);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
            let up = |x: f64| (x + bump).min(1.0);
            for bumped in [
                RewardComponents { format: up(a), ..base },
                RewardComponents { correct: up(b), ..base },
                RewardComponents { quality: up(c), ..base },
            ] {
                prop_assert!(combined_reward(bumped, &w) >= r);
            }
        }
    }
}
