use std::collections::{BTreeMap, HashMap, HashSet};

use rustpython_parser::ast::{Constant, Expr, Ranged, Stmt};
use rustpython_parser::text_size::TextRange;
use serde::{Deserialize, Serialize};

use crate::findings::{rules, Finding};
use crate::pysource::walk::{for_each_expr, for_each_stmt, function_parts};
use crate::pysource::{docstring, target_name, SourceUnit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecretHeuristics {
    /// Case-insensitive substrings of names that suggest a credential.
    pub name_patterns: Vec<String>,
    pub min_entropy_bits_per_char: f64,
    pub min_literal_length: usize,
}

impl Default for SecretHeuristics {
    fn default() -> Self {
        Self {
            name_patterns: ["password", "passwd", "secret", "token", "api_key", "apikey", "private_key"]
                .map(String::from)
                .to_vec(),
            min_entropy_bits_per_char: 3.5,
            min_literal_length: 16,
        }
    }
}

impl SecretHeuristics {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_literal_length < 8 {
            return Err(format!("min_literal_length must be at least 8, got {}", self.min_literal_length));
        }
        if !self.min_entropy_bits_per_char.is_finite() || self.min_entropy_bits_per_char < 0.0 {
            return Err("min_entropy_bits_per_char must be a non-negative number".into());
        }
        if self.name_patterns.iter().any(|p| p.is_empty()) {
            return Err("name_patterns must not contain empty strings".into());
        }
        Ok(())
    }

    pub fn matches_name(&self, name: &str) -> bool {
        let lower = name.to_ascii_lowercase();
        self.name_patterns.iter().any(|p| lower.contains(&p.to_ascii_lowercase()))
    }

    /// Long, dense, token-shaped literal.
    pub fn looks_random(&self, literal: &str) -> bool {
        literal.chars().count() >= self.min_literal_length
            && is_token_like(literal)
            && shannon_entropy(literal) >= self.min_entropy_bits_per_char
    }
}

/// Shannon entropy in bits per character.
pub fn shannon_entropy(text: &str) -> f64 {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut total = 0usize;
    for c in text.chars() {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .values()
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Key and token alphabets: base64, hex, url-safe. Paths and prose are not
/// token-like.
fn is_token_like(s: &str) -> bool {
    s.chars().all(|c| c.is_ascii_alphanumeric() || "_+/=.-".contains(c))
        && s.chars().any(|c| c.is_ascii_alphabetic())
        && s.chars().any(|c| c.is_ascii_digit())
        && !s.starts_with(['/', '.'])
}

fn is_placeholder(s: &str) -> bool {
    let trimmed = s.trim();
    let mut chars = trimmed.chars();
    let single_repeated = chars.next().is_some_and(|first| chars.all(|c| c == first));
    trimmed.is_empty()
        || trimmed.eq_ignore_ascii_case("changeme")
        || (trimmed.starts_with('<') && trimmed.ends_with('>'))
        || single_repeated
}

fn str_constant(expr: &Expr) -> Option<(&str, TextRange)> {
    match expr {
        Expr::Constant(c) => match &c.value {
            Constant::Str(s) => Some((s.as_str(), c.range)),
            _ => None,
        },
        _ => None,
    }
}

pub fn detect_hardcoded_secrets(unit: &SourceUnit, h: &SecretHeuristics) -> Vec<Finding> {
    let mut hits: BTreeMap<(u32, u32), (TextRange, String)> = BTreeMap::new();
    let mut record = |range: TextRange, why: String| {
        hits.entry((range.start().into(), range.end().into())).or_insert((range, why));
    };

    // Literals bound to credential-like names.
    let named = |name: &str, value: &Expr, record: &mut dyn FnMut(TextRange, String)| {
        if let Some((text, range)) = str_constant(value) {
            if h.matches_name(name) && !is_placeholder(text) {
                record(range, format!("hard-coded credential assigned to `{name}`"));
            }
        }
    };
    let mut docstrings = HashSet::new();
    let mut note_docstring = |body: &[Stmt]| {
        if let (Some(Stmt::Expr(e)), Some(_)) = (body.first(), docstring(body)) {
            docstrings.insert(u32::from(e.value.range().start()));
        }
    };
    note_docstring(&unit.syntax_root);
    for_each_stmt(&unit.syntax_root, &mut |stmt| {
        match stmt {
            Stmt::Assign(s) => {
                for t in &s.targets {
                    if let Some(name) = target_name(t) {
                        named(name, &s.value, &mut record);
                    }
                }
            }
            Stmt::AnnAssign(s) => {
                if let (Some(name), Some(v)) = (target_name(&s.target), s.value.as_deref()) {
                    named(name, v, &mut record);
                }
            }
            Stmt::ClassDef(c) => note_docstring(&c.body),
            _ => {}
        }
        if let Some(parts) = function_parts(stmt) {
            note_docstring(parts.body);
            let args = parts.args;
            let params = args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs);
            for p in params {
                if let Some(default) = p.default.as_deref() {
                    named(p.def.arg.as_str(), default, &mut record);
                }
            }
        }
    });
    for_each_expr(&unit.syntax_root, &mut |e| match e {
        Expr::Call(call) => {
            for kw in &call.keywords {
                if let Some(arg) = &kw.arg {
                    named(arg.as_str(), &kw.value, &mut record);
                }
            }
        }
        Expr::Dict(d) => {
            for (key, value) in d.keys.iter().zip(&d.values) {
                if let Some((key, _)) = key.as_ref().and_then(str_constant) {
                    named(key, value, &mut record);
                }
            }
        }
        Expr::Compare(c) => {
            if let Some(name) = target_name(&c.left) {
                for cmp in &c.comparators {
                    named(name, cmp, &mut record);
                }
            }
        }
        _ => {}
    });

    // High-entropy literals anywhere except docstrings.
    for_each_expr(&unit.syntax_root, &mut |e| {
        if let Some((text, range)) = str_constant(e) {
            if !docstrings.contains(&u32::from(range.start())) && !is_placeholder(text) && h.looks_random(text) {
                record(
                    range,
                    format!("high-entropy literal ({:.2} bits/char) looks like a secret", shannon_entropy(text)),
                );
            }
        }
    });

    hits.into_values()
        .map(|(range, why)| Finding::new(rules::SEC_HARDCODED_SECRET, unit.span_of(range), why))
        .collect()
}
