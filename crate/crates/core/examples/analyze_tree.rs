//! Walk a directory and print the JSON quality report.
//!
//! ```text
//! cargo run --example analyze_tree -- crates/core/tests/fixtures/clean
//! ```

use codequal::scoring::Analyzer;

fn main() {
    let roots: Vec<String> = std::env::args().skip(1).collect();
    let roots = if roots.is_empty() { vec![".".to_string()] } else { roots };
    let report = Analyzer::with_defaults().analyze_path(&roots);
    println!("{}", report.to_json());
    eprintln!("{} file(s), aggregate score {:.4}", report.per_file.len(), report.aggregate_score);
}
