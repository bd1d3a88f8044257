//! Score-versus-issue-count curves, one per severity, and an SVG plot.

use std::fmt::Write as _;

use crate::findings::{Severity, SeverityWeights};

use super::quality_score;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCurve {
    pub severity: Severity,
    /// `scores[n]` is the score with `n` findings of this severity.
    pub scores: Vec<f64>,
}

pub fn score_curves(weights: &SeverityWeights, max_issues: usize) -> Vec<ScoreCurve> {
    Severity::ALL
        .iter()
        .map(|&severity| ScoreCurve {
            severity,
            scores: (0..=max_issues).map(|n| quality_score(weights.weight(severity) * n as f64)).collect(),
        })
        .collect()
}

const COLORS: [&str; 5] = ["#4c72b0", "#55a868", "#dd8452", "#c44e52", "#8172b3"];

/// Line plot of the curves: x is the issue count, y the score in [0, 1].
pub fn render_svg(curves: &[ScoreCurve]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let max_n = curves.iter().map(|c| c.scores.len().saturating_sub(1)).max().unwrap_or(0).max(1) as f64;
    let x = |n: usize| pad + (w - 2.0 * pad) * n as f64 / max_n;
    let y = |s: f64| h - pad - (h - 2.0 * pad) * s;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">Quality score by number of issues and severity</text>"#, w / 2.0);
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - pad, w - pad);
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    for tick in 0..=4 {
        let s = tick as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{s:.2}</text>"#, pad - 6.0, y(s) + 4.0);
    }
    let step = (max_n as usize / 10).max(1);
    for n in (0..=max_n as usize).step_by(step) {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{n}</text>"#, x(n), h - pad + 16.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">number of issues</text>"#, w / 2.0, h - 10.0);
    let _ = writeln!(svg, r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {0})">score</text>"#, h / 2.0);

    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = curve.scores.iter().enumerate().map(|(n, s)| format!("{:.2},{:.2}", x(n), y(*s))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, points.join(" "));
        let ly = pad + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - pad - 90.0, w - pad - 70.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, w - pad - 64.0, ly + 4.0, curve.severity);
    }
    svg.push_str("</svg>\n");
    svg
}
