//! Audit a requirements manifest against the bundled advisory records.

use codequal::scoring::Analyzer;

const REQUIREMENTS: &str = "\
requests==2.19.0
pyyaml==5.3
numpy>=1.26
django ~= 
";

fn main() {
    let report = Analyzer::with_defaults().analyze_manifest("requirements.txt", REQUIREMENTS);
    for f in &report.findings {
        println!("line {}  {:<28} {:<9} {}", f.span.start_line, f.rule_id, f.cwe_id.as_deref().unwrap_or("-"), f.message);
    }
}
