//! Run tests through a pool of test-runner workers.
//!
//! ```text
//! cargo run --example runner_pool -- python3 crates/core/tests/fixtures/fake_runner.py
//! ```

use codequal::runner::{PoolOptions, RunnerCommand, RunnerPool};

fn main() -> anyhow::Result<()> {
    let line = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let command = RunnerCommand::parse(&line)
        .or_else(RunnerCommand::from_env)
        .ok_or_else(|| anyhow::anyhow!("give a runner command or set CODEQUAL_TESTRUNNER"))?;
    let pool = RunnerPool::new(command, PoolOptions::default());
    pool.probe()?;
    let solution = "def add(a, b):\n    return a + b\n";
    let tests = "def test_small():\n    assert add(1, 2) == 3\n\ndef test_wrong():\n    assert add(1, 1) == 3\n";
    let report = pool.run(solution, tests)?;
    println!("{}/{} passed", report.passed, report.total_tests);
    for t in &report.per_test {
        println!("  {:<12} {} {}", t.name, if t.passed { "ok" } else { "FAIL" }, t.message);
    }
    Ok(())
}
