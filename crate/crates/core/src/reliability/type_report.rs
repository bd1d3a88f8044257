//! Ingestion of an external type checker's line-oriented report.
//!
//! Accepted line shapes (column optional, 1-based):
//!
//! ```text
//! path/to/file.py:12:5: code: message
//! path/to/file.py:12: error: message  [code]
//! ```
//!
//! `note:` lines and anything that does not match are skipped; skipped
//! lines are returned so callers can surface them.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::findings::{rules, Finding};
use crate::pysource::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeReportEntry {
    pub file: String,
    pub line: usize,
    /// 0-based, like every other span column.
    pub column: usize,
    pub code: String,
    pub message: String,
}

impl TypeReportEntry {
    pub fn to_finding(&self) -> Finding {
        Finding::new(
            rules::REL_EXTERNAL_TYPE,
            Span::new(self.file.clone(), self.line, self.column, self.line, self.column),
            format!("[{}] {}", self.code, self.message),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeReport {
    pub entries: Vec<TypeReportEntry>,
    /// 1-based line numbers of report lines that were not understood.
    pub skipped: Vec<usize>,
}

fn line_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?P<file>[^:]+):(?P<line>\d+)(?::(?P<col>\d+))?:\s*(?P<kind>[A-Za-z][\w-]*):\s*(?P<msg>.*?)\s*$")
            .unwrap()
    })
}

fn trailing_code() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?P<msg>.*?)\s*\[(?P<code>[\w-]+)\]$").unwrap())
}

pub fn parse_type_report(text: &str) -> TypeReport {
    let mut report = TypeReport::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some(caps) = line_regex().captures(line) else {
            report.skipped.push(i + 1);
            continue;
        };
        let kind = &caps["kind"];
        if kind == "note" {
            continue;
        }
        let line_no: usize = caps["line"].parse().unwrap_or(0);
        if line_no == 0 {
            report.skipped.push(i + 1);
            continue;
        }
        let column = caps.name("col").and_then(|c| c.as_str().parse::<usize>().ok()).map_or(0, |c| c.saturating_sub(1));
        let msg = &caps["msg"];
        let (code, message) = match (kind, trailing_code().captures(msg)) {
            ("error" | "warning", Some(c)) => (c["code"].to_string(), c["msg"].to_string()),
            _ => (kind.to_string(), msg.to_string()),
        };
        report.entries.push(TypeReportEntry {
            file: caps["file"].to_string(),
            line: line_no,
            column,
            code,
            message,
        });
    }
    report
}
