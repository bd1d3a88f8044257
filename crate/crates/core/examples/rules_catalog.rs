//! List the rule catalog, optionally for one category.
//!
//! ```text
//! cargo run --example rules_catalog -- reliability
//! ```

use codequal::findings::{catalog, Category};

fn main() -> anyhow::Result<()> {
    let category = std::env::args().nth(1).map(|c| c.parse::<Category>()).transpose().map_err(anyhow::Error::msg)?;
    for entry in catalog(category) {
        println!(
            "{:<30} {:<16} {:<9} {:<9} {}",
            entry.rule_id,
            entry.category,
            entry.default_severity,
            entry.cwe_id.as_deref().unwrap_or("-"),
            entry.title
        );
    }
    Ok(())
}
