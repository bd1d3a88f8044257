//! Quality score as a function of finding count, one curve per severity.
//! Prints a table and writes an SVG plot.
//!
//! ```text
//! cargo run --example score_curves -- curves.svg
//! ```

use codequal::findings::SeverityWeights;
use codequal::scoring::curves::{render_svg, score_curves};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "score_curves.svg".into());
    let curves = score_curves(&SeverityWeights::default(), 20);
    print!("{:>3}", "N");
    for c in &curves {
        print!(" {:>9}", c.severity);
    }
    println!();
    for n in 0..=20 {
        print!("{n:>3}");
        for c in &curves {
            print!(" {:>9.4}", c.scores[n]);
        }
        println!();
    }
    std::fs::write(&out, render_svg(&curves))?;
    println!("wrote {out}");
    Ok(())
}
