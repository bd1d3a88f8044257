//! Tune thresholds and weights with TOML, then apply per-request JSON
//! overrides. Each distinct configuration has its own fingerprint.

use codequal::scoring::{Analyzer, AnalyzerConfig};
use serde_json::json;

const CONFIG: &str = r#"
disabled_rules = ["MAINT-NAMING"]

[severity_weights]
critical = 20.0

[maintainability]
max_parameters = 3
"#;

const SOURCE: &str = "def mix(a: int, b: int, c: int, d: int) -> int:\n    \"\"\"Sum.\"\"\"\n    return a + b + c + d\n\nAPI_KEY = \"sk_live_9fQ2xL7pRt4Vb8Nz\"\n";

fn main() -> anyhow::Result<()> {
    let config = AnalyzerConfig::from_toml_str(CONFIG)?;
    let strict = Analyzer::new(config.clone())?;
    let relaxed = Analyzer::new(config.with_overrides(&json!({"maintainability": {"max_parameters": 8}}))?)?;
    for (name, analyzer) in [("default", Analyzer::with_defaults()), ("strict", strict), ("relaxed", relaxed)] {
        let report = analyzer.analyze_source("mix.py", SOURCE);
        let rules: Vec<_> = report.findings.iter().map(|f| f.rule_id.as_str()).collect();
        println!("{name:<8} W={:<5} score={:.4} {rules:?}", report.weighted_sum, report.score);
        println!("         {}", analyzer.fingerprint());
    }
    Ok(())
}
