//! Requirements-file auditing against a local advisory database.
//!
//! Database format, one record per line:
//!
//! ```text
//! # comment
//! package-name | <range> | ADVISORY-ID | CWE-NNN
//! ```
//!
//! `<range>` is a comma-separated conjunction of comparators (`<`, `<=`,
//! `>`, `>=`, `==`, `!=`) or `*` for every version. The CWE column may be
//! empty. Package names are compared after lowercasing and folding `_` and
//! `.` to `-`. Versions follow a reduced PEP 440 ordering: optional epoch,
//! numeric release segments (missing segments are zero), then `a`/`b`/`rc`
//! pre-releases, `.post` and `.dev` suffixes. Local labels (`+...`) are
//! ignored.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;

use crate::findings::{rules, Finding};
use crate::pysource::Span;

/// The advisory data shipped with the crate.
pub const BUNDLED_ADVISORIES: &str = include_str!("../../data/advisories.txt");

#[derive(Debug, thiserror::Error)]
pub enum AdvisoryDbError {
    #[error("advisory db line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read advisory db {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

// ---------------------------------------------------------------------------
// Versions

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    /// `1.0.dev1` sorts before `1.0a1`.
    DevRelease,
    Alpha,
    Beta,
    Candidate,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Version {
    epoch: u64,
    release: Vec<u64>,
    pre: Option<(Phase, u64)>,
    post: Option<u64>,
    dev: Option<u64>,
    text: String,
}

fn version_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?ix)^v?
            (?:(?P<epoch>\d+)!)?
            (?P<release>\d+(?:\.\d+)*)
            (?:[-_.]?(?P<pre_l>a|alpha|b|beta|rc|c|pre|preview)[-_.]?(?P<pre_n>\d*))?
            (?:[-_.]?(?:post|rev|r)[-_.]?(?P<post>\d*))?
            (?:[-_.]?dev[-_.]?(?P<dev>\d*))?
            (?:\+[a-z0-9.]+)?$",
        )
        .unwrap()
    })
}

impl FromStr for Version {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let caps = version_regex()
            .captures(text)
            .ok_or_else(|| format!("invalid version `{text}`"))?;
        let num = |name: &str| -> Option<u64> {
            caps.name(name).map(|m| m.as_str().parse().unwrap_or(0))
        };
        let release = caps["release"]
            .split('.')
            .map(|p| p.parse::<u64>().map_err(|e| format!("version `{text}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let pre = caps.name("pre_l").map(|l| {
            let phase = match l.as_str().to_ascii_lowercase().as_str() {
                "a" | "alpha" => Phase::Alpha,
                "b" | "beta" => Phase::Beta,
                _ => Phase::Candidate,
            };
            (phase, num("pre_n").unwrap_or(0))
        });
        Ok(Self {
            epoch: num("epoch").unwrap_or(0),
            release,
            pre,
            post: num("post"),
            dev: num("dev"),
            text: text.to_string(),
        })
    }
}

impl Version {
    fn phase_key(&self) -> (Phase, u64) {
        match (self.pre, self.post, self.dev) {
            (Some(pre), _, _) => pre,
            (None, None, Some(_)) => (Phase::DevRelease, 0),
            _ => (Phase::Final, 0),
        }
    }

    fn release_cmp(&self, other: &Self) -> Ordering {
        let n = self.release.len().max(other.release.len());
        (0..n)
            .map(|i| {
                let a = self.release.get(i).copied().unwrap_or(0);
                let b = other.release.get(i).copied().unwrap_or(0);
                a.cmp(&b)
            })
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        // A missing dev segment sorts after any dev segment.
        let dev_key = |v: &Version| v.dev.map_or((1, 0), |d| (0, d));
        self.epoch
            .cmp(&other.epoch)
            .then_with(|| self.release_cmp(other))
            .then_with(|| self.phase_key().cmp(&other.phase_key()))
            .then_with(|| self.post.cmp(&other.post))
            .then_with(|| dev_key(self).cmp(&dev_key(other)))
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

// ---------------------------------------------------------------------------
// Ranges

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionRange {
    clauses: Vec<(Comparator, Version)>,
    text: String,
}

impl FromStr for VersionRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim().to_string();
        if text == "*" {
            return Ok(Self { clauses: Vec::new(), text });
        }
        let mut clauses = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (op, rest) = [("<=", Comparator::Le), (">=", Comparator::Ge), ("==", Comparator::Eq), ("!=", Comparator::Ne), ("<", Comparator::Lt), (">", Comparator::Gt)]
                .into_iter()
                .find_map(|(tok, op)| part.strip_prefix(tok).map(|rest| (op, rest)))
                .ok_or_else(|| format!("range clause `{part}` lacks a comparator"))?;
            clauses.push((op, rest.parse()?));
        }
        if clauses.is_empty() {
            return Err("empty version range".into());
        }
        Ok(Self { clauses, text })
    }
}

impl VersionRange {
    pub fn contains(&self, v: &Version) -> bool {
        self.clauses.iter().all(|(op, bound)| {
            let o = v.cmp(bound);
            match op {
                Comparator::Lt => o.is_lt(),
                Comparator::Le => o.is_le(),
                Comparator::Gt => o.is_gt(),
                Comparator::Ge => o.is_ge(),
                Comparator::Eq => o.is_eq(),
                Comparator::Ne => o.is_ne(),
            }
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

// ---------------------------------------------------------------------------
// Database

pub fn normalize_package_name(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace(['_', '.'], "-")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdvisoryRecord {
    pub package_name: String,
    pub vulnerable_range: VersionRange,
    pub advisory_id: String,
    pub cwe_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdvisoryDb {
    records: Vec<AdvisoryRecord>,
}

impl AdvisoryDb {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The database compiled into the crate.
    pub fn bundled() -> &'static AdvisoryDb {
        static DB: OnceLock<AdvisoryDb> = OnceLock::new();
        DB.get_or_init(|| AdvisoryDb::parse(BUNDLED_ADVISORIES).expect("bundled advisory db is well-formed"))
    }

    pub fn load(path: &Path) -> Result<Self, AdvisoryDbError> {
        let text = std::fs::read_to_string(path).map_err(|source| AdvisoryDbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AdvisoryDbError> {
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| AdvisoryDbError::Syntax { line: i + 1, message };
            let fields: Vec<&str> = line.split('|').map(str::trim).collect();
            let [name, range, advisory, cwe] = fields[..] else {
                return Err(syntax(format!("expected 4 `|`-separated fields, found {}", fields.len())));
            };
            if name.is_empty() || advisory.is_empty() {
                return Err(syntax("package name and advisory id are required".into()));
            }
            if !cwe.is_empty() && !cwe.strip_prefix("CWE-").is_some_and(|n| n.parse::<u32>().is_ok()) {
                return Err(syntax(format!("malformed CWE id `{cwe}`")));
            }
            records.push(AdvisoryRecord {
                package_name: normalize_package_name(name),
                vulnerable_range: range.parse().map_err(syntax)?,
                advisory_id: advisory.to_string(),
                cwe_id: (!cwe.is_empty()).then(|| cwe.to_string()),
            });
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[AdvisoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn matching<'a>(&'a self, package: &'a str, version: &'a Version) -> impl Iterator<Item = &'a AdvisoryRecord> {
        let package = normalize_package_name(package);
        self.records
            .iter()
            .filter(move |r| r.package_name == package && r.vulnerable_range.contains(version))
    }
}

// ---------------------------------------------------------------------------
// Requirements

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Requirement {
    pub name: String,
    /// `Some` only for an exact `==` pin.
    pub pinned: Option<Version>,
}

fn requirement_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)^
            (?P<name>[A-Za-z0-9](?:[A-Za-z0-9._-]*[A-Za-z0-9])?)
            \s*(?:\[[A-Za-z0-9._,\s-]*\])?
            \s*(?P<specs>
                (?:===|==|!=|<=|>=|~=|<|>)\s*[A-Za-z0-9.*+!_-]+
                (?:\s*,\s*(?:===|==|!=|<=|>=|~=|<|>)\s*[A-Za-z0-9.*+!_-]+)*
              | @\s*\S+
            )?
            \s*(?:;.*)?$",
        )
        .unwrap()
    })
}

/// Parse one logical requirements line. `Ok(None)` for blank lines,
/// comments and pip options.
pub fn parse_requirement(line: &str) -> Result<Option<Requirement>, String> {
    // pip treats `#` as a comment when it starts the line or follows whitespace.
    let uncommented = match line.find(" #").or_else(|| line.find("\t#")) {
        Some(i) => &line[..i],
        None if line.trim_start().starts_with('#') => "",
        None => line,
    };
    let text = uncommented.trim();
    if text.is_empty() || text.starts_with('-') {
        return Ok(None);
    }
    let caps = requirement_regex()
        .captures(text)
        .ok_or_else(|| format!("unparseable requirement `{text}`"))?;
    let name = caps["name"].to_string();
    let specs = caps.name("specs").map_or("", |m| m.as_str());
    let pinned = match specs.strip_prefix("==") {
        Some(v) if !specs.contains(',') && !v.contains('*') && !v.starts_with('=') => Some(v.trim().parse()?),
        _ => None,
    };
    Ok(Some(Requirement { name, pinned }))
}

fn line_span(label: &str, number: usize, line: &str) -> Span {
    Span::new(label, number, 0, number, line.chars().count())
}

/// Audit a requirements manifest. Unparseable lines produce an info finding.
pub fn check_manifest(label: &str, manifest_text: &str, db: &AdvisoryDb) -> Vec<Finding> {
    let mut out = Vec::new();
    for (i, line) in manifest_text.lines().enumerate() {
        let span = line_span(label, i + 1, line);
        match parse_requirement(line) {
            Ok(Some(Requirement { name, pinned: Some(version) })) => {
                for record in db.matching(&name, &version) {
                    let cwe = record.cwe_id.as_deref().map_or(String::new(), |c| format!(", {c}"));
                    out.push(Finding::new(
                        rules::SEC_VULNERABLE_DEPENDENCY,
                        span.clone(),
                        format!(
                            "{name}=={version} is affected by {} (vulnerable {}{cwe})",
                            record.advisory_id,
                            record.vulnerable_range.as_str()
                        ),
                    ));
                }
            }
            Ok(_) => {}
            Err(message) => out.push(Finding::new(rules::SEC_UNPARSEABLE_REQUIREMENT, span, message)),
        }
    }
    out
}

/// [`check_manifest`] with the conventional `requirements.txt` label.
pub fn check_dependencies(manifest_text: &str, db: &AdvisoryDb) -> Vec<Finding> {
    check_manifest("requirements.txt", manifest_text, db)
}
