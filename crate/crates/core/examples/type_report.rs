//! Merge an external type checker's output (mypy style) into a report.

use codequal::reliability::parse_type_report;
use codequal::scoring::Analyzer;

const SOURCE: &str = "def half(x: int) -> int:\n    \"\"\"Half of x.\"\"\"\n    return x / 2\n";
const MYPY: &str = "\
app/half.py:3: error: Incompatible return value type (got \"float\", expected \"int\")  [return-value]
app/half.py:3: note: See https://mypy.rtfd.io
Found 1 error in 1 file (checked 1 source file)
";

fn main() {
    let parsed = parse_type_report(MYPY);
    println!("{} entries, {} skipped line(s)", parsed.entries.len(), parsed.skipped.len());
    let analyzer = Analyzer::with_defaults().with_external_findings(parsed.entries.iter().map(|e| e.to_finding()).collect());
    let report = analyzer.analyze_source("app/half.py", SOURCE);
    for f in &report.findings {
        println!("{}  {}  {}", f.span, f.rule_id, f.message);
    }
    println!("score {:.4}", report.score);
}
