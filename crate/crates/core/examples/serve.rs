//! Start the HTTP scoring service with the fixture problems loaded.
//!
//! ```text
//! cargo run --example serve
//! curl -s localhost:8787/v1/health
//! curl -s localhost:8787/v1/score -d '{"completion": "```python\nx = 1\n```"}' -H 'content-type: application/json'
//! ```

use std::path::Path;

use codequal::dataset::Dataset;
use codequal::interface::{service, Engine, Settings};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let problems = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/problems.jsonl");
    let dataset = Dataset::load(&problems)?;
    let engine = Engine::from_settings(Settings::default())?;
    service::serve("127.0.0.1:8787".parse()?, engine, dataset).await?;
    Ok(())
}
