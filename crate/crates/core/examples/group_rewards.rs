//! Score a group of completions for one problem and compute their
//! group-relative advantages. Without a test runner r_correct is reported
//! as unavailable; set CODEQUAL_TESTRUNNER to measure it.
//!
//! ```text
//! cargo run --example group_rewards
//! CODEQUAL_TESTRUNNER="python3 crates/core/tests/fixtures/fake_runner.py" cargo run --example group_rewards
//! ```

use std::sync::Arc;

use codequal::dataset::ProblemRecord;
use codequal::reward::{group_advantages, RolloutScorer};
use codequal::runner::RunnerPool;
use codequal::scoring::Analyzer;

fn main() {
    let problem = ProblemRecord {
        problem_id: "square".into(),
        difficulty: "easy".into(),
        statement: "Return x squared.".into(),
        initial_code: "def square(x: int) -> int:\n    pass\n".into(),
        ideal_solution: "def square(x: int) -> int:\n    \"\"\"x times x.\"\"\"\n    return x * x\n".into(),
        test_code: "def test_square():\n    assert square(3) == 9\n".into(),
    };
    let completions = [
        "```python\ndef square(x: int) -> int:\n    \"\"\"x times x.\"\"\"\n    return x * x\n```",
        "```python\ndef square(x):\n    return eval(f\"{x} * {x}\")\n```",
        "```python\ndef square(x: int) -> int:\n    \"\"\"Wrong.\"\"\"\n    return x + x\n```",
        "The answer is x * x.",
    ];

    let mut scorer = RolloutScorer::new(Analyzer::with_defaults());
    if let Some(pool) = RunnerPool::from_env() {
        scorer = scorer.with_executor(Arc::new(pool));
    }
    let breakdowns: Vec<_> = completions.iter().map(|c| scorer.score(c, Some(&problem))).collect();
    let totals: Vec<f64> = breakdowns.iter().map(|b| b.r_total).collect();
    let advantages = group_advantages(&totals);
    println!("{:>2} {:>8} {:>9} {:>9} {:>7} {:>9}", "#", "r_format", "r_correct", "r_quality", "r_total", "advantage");
    for (i, (b, a)) in breakdowns.iter().zip(&advantages).enumerate() {
        println!("{i:>2} {:>8.3} {:>9.3} {:>9.3} {:>7.3} {:>9.3}  {:?}", b.r_format, b.r_correct, b.r_quality, b.r_total, a, b.correctness);
    }
}
