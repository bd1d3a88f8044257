//! Analyze a Python snippet and print its findings and quality score.
//!
//! ```text
//! cargo run --example analyze_snippet
//! cargo run --example analyze_snippet -- path/to/file.py
//! ```

use codequal::scoring::Analyzer;

const SAMPLE: &str = r#"import os
import pickle


def load(path):
    data = open(path).read()
    try:
        return pickle.loads(data)
    except:
        os.system("rm " + path)
"#;

fn main() -> anyhow::Result<()> {
    let (label, text) = match std::env::args().nth(1) {
        Some(path) => (path.clone(), std::fs::read_to_string(&path)?),
        None => ("sample.py".to_string(), SAMPLE.to_string()),
    };
    let report = Analyzer::with_defaults().analyze_file_text(&label, &text);
    for f in &report.findings {
        println!(
            "{}:{}  {:<8} {:<24} {:<8} {}",
            f.span.start_line,
            f.span.start_col,
            f.severity,
            f.rule_id,
            f.cwe_id.as_deref().unwrap_or("-"),
            f.message
        );
    }
    println!("W = {}, r_quality = {:.4}", report.weighted_sum, report.score);
    Ok(())
}
