//! Injection, unsafe deserialization, weak cryptography, secrets and
//! vulnerable dependency checks.

mod dependencies;
mod secrets;

use rustpython_parser::ast::{self, Constant, Expr, Operator, Stmt};

use crate::findings::{rules, Finding};
use crate::pysource::walk::{for_each_expr, for_each_stmt, for_each_subexpr, function_parts};
use crate::pysource::{call_arg, constant_truth, keyword_arg, string_literal, target_name, SourceUnit};

pub use dependencies::{
    check_dependencies, check_manifest, normalize_package_name, parse_requirement, AdvisoryDb, AdvisoryDbError, AdvisoryRecord, Requirement, Version,
    VersionRange, BUNDLED_ADVISORIES,
};
pub use secrets::{detect_hardcoded_secrets, shannon_entropy, SecretHeuristics};

fn calls(unit: &SourceUnit) -> Vec<(&ast::ExprCall, String)> {
    let mut out = Vec::new();
    for_each_expr(&unit.syntax_root, &mut |e| {
        if let Expr::Call(call) = e {
            if let Some(callee) = unit.bindings.resolve(&call.func) {
                out.push((call, callee));
            }
        }
    });
    out
}

/// True when a command string is assembled at runtime.
fn is_interpolated(expr: &Expr) -> bool {
    match expr {
        Expr::JoinedStr(j) => j.values.iter().any(|v| matches!(v, Expr::FormattedValue(_))),
        Expr::BinOp(b) if b.op == Operator::Mod => string_literal(&b.left).is_some(),
        Expr::BinOp(b) if b.op == Operator::Add => {
            let mut has_string = false;
            let mut has_dynamic = false;
            for_each_subexpr(expr, &mut |e| match e {
                Expr::BinOp(inner) if inner.op == Operator::Add => {}
                Expr::Constant(c) => has_string |= matches!(c.value, Constant::Str(_)),
                Expr::JoinedStr(_) => has_string = true,
                _ => has_dynamic = true,
            });
            // Sub-expressions of dynamic operands are also visited, which only
            // ever adds to `has_dynamic`.
            has_string && has_dynamic
        }
        Expr::Call(c) => matches!(
            &*c.func,
            Expr::Attribute(a) if a.attr.as_str() == "format" && string_literal(&a.value).is_some()
        ),
        _ => false,
    }
}

const SUBPROCESS_CALLS: &[&str] = &["run", "call", "check_call", "check_output", "Popen"];

pub fn detect_injection(unit: &SourceUnit) -> Vec<Finding> {
    let mut out = Vec::new();
    for (call, callee) in calls(unit) {
        let span = unit.span(call);
        let command = call_arg(call, 0, "args").or_else(|| call_arg(call, 0, "cmd"));
        let escalate = command.is_some_and(is_interpolated);
        let finding = match callee.as_str() {
            "os.system" | "os.popen" => Some(Finding::new(
                rules::SEC_SHELL_INJECTION,
                span,
                format!("`{callee}` runs its argument through the shell"),
            )),
            "subprocess.getoutput" | "subprocess.getstatusoutput" => Some(Finding::new(
                rules::SEC_SUBPROCESS_SHELL,
                span,
                format!("`{callee}` always invokes a shell"),
            )),
            c if c
                .strip_prefix("subprocess.")
                .is_some_and(|f| SUBPROCESS_CALLS.contains(&f)) =>
            {
                let shell = keyword_arg(call, "shell");
                let enabled = shell.is_some_and(|v| constant_truth(v) != Some(false));
                enabled.then(|| {
                    Finding::new(
                        rules::SEC_SUBPROCESS_SHELL,
                        span,
                        format!("`{callee}` called with shell=True"),
                    )
                })
            }
            "eval" | "exec" | "builtins.eval" | "builtins.exec" => {
                let source = call_arg(call, 0, "source");
                let literal = source.is_some_and(|s| string_literal(s).is_some());
                (!literal && source.is_some()).then(|| {
                    Finding::new(
                        rules::SEC_EVAL_EXEC,
                        span,
                        format!("`{callee}` evaluates a non-literal expression"),
                    )
                })
            }
            _ => None,
        };
        if let Some(f) = finding {
            let escalates = f.rule_id != rules::SEC_EVAL_EXEC && escalate;
            out.push(if escalates { f.escalated() } else { f });
        }
    }
    out
}

const PICKLE_MODULES: &[&str] = &["pickle", "cPickle", "_pickle", "dill"];

const XML_PARSERS: &[&str] = &[
    "xml.etree.ElementTree.parse",
    "xml.etree.ElementTree.fromstring",
    "xml.etree.ElementTree.XML",
    "xml.etree.ElementTree.iterparse",
    "xml.etree.cElementTree.parse",
    "xml.etree.cElementTree.fromstring",
    "xml.etree.cElementTree.iterparse",
    "xml.dom.minidom.parse",
    "xml.dom.minidom.parseString",
    "xml.dom.pulldom.parse",
    "xml.dom.pulldom.parseString",
    "xml.sax.parse",
    "xml.sax.parseString",
    "lxml.etree.parse",
    "lxml.etree.fromstring",
    "lxml.etree.XML",
];

fn is_safe_yaml_loader(loader: &Expr) -> bool {
    target_name(loader).is_some_and(|n| n.contains("Safe"))
}

pub fn detect_unsafe_deserialization(unit: &SourceUnit) -> Vec<Finding> {
    let mut out = Vec::new();
    for (call, callee) in calls(unit) {
        let span = unit.span(call);
        let (module, func) = callee.rsplit_once('.').unwrap_or(("", callee.as_str()));
        let pickle_like = (PICKLE_MODULES.contains(&module) && matches!(func, "load" | "loads" | "Unpickler"))
            || (module == "marshal" && matches!(func, "load" | "loads"))
            || callee == "shelve.open"
            || callee == "pandas.read_pickle"
            || callee == "jsonpickle.decode";
        if pickle_like {
            out.push(Finding::new(
                rules::SEC_PICKLE,
                span,
                format!("`{callee}` can execute arbitrary code while deserializing"),
            ));
            continue;
        }
        if module == "yaml" {
            let unsafe_load = match func {
                "load" | "load_all" => !call_arg(call, 1, "Loader").is_some_and(is_safe_yaml_loader),
                "unsafe_load" | "unsafe_load_all" | "full_load" | "full_load_all" => true,
                _ => false,
            };
            if unsafe_load {
                out.push(Finding::new(
                    rules::SEC_YAML_LOAD,
                    span,
                    format!("`{callee}` without a safe loader can construct arbitrary objects"),
                ));
            }
            continue;
        }
        if XML_PARSERS.contains(&callee.as_str()) {
            let input = call_arg(call, 0, "source").or_else(|| call_arg(call, 0, "text"));
            if input.is_some_and(|i| !matches!(i, Expr::Constant(_))) {
                out.push(Finding::new(
                    rules::SEC_XML_PARSE,
                    span,
                    format!("`{callee}` parses untrusted XML without entity protection"),
                ));
            }
        }
    }
    out
}

const WEAK_HASHES: &[&str] = &["md5", "sha1"];

fn random_calls_in<'a>(unit: &'a SourceUnit, expr: &'a Expr, sink: &mut Vec<&'a ast::ExprCall>) {
    for_each_subexpr(expr, &mut |e| {
        if let Expr::Call(call) = e {
            let callee = unit.bindings.resolve(&call.func).unwrap_or_default();
            let is_random = callee
                .strip_prefix("random.")
                .is_some_and(|f| !f.starts_with("SystemRandom") && !f.contains('.'));
            if is_random {
                sink.push(call);
            }
        }
    });
}

pub fn detect_weak_crypto(unit: &SourceUnit, heuristics: &SecretHeuristics) -> Vec<Finding> {
    let mut out = Vec::new();
    for (call, callee) in calls(unit) {
        let algorithm = match callee.as_str() {
            "hashlib.md5" => Some("md5".to_string()),
            "hashlib.sha1" => Some("sha1".to_string()),
            "hashlib.new" => call_arg(call, 0, "name")
                .and_then(string_literal)
                .map(str::to_ascii_lowercase)
                .filter(|n| WEAK_HASHES.contains(&n.as_str())),
            "cryptography.hazmat.primitives.hashes.MD5" => Some("md5".to_string()),
            "cryptography.hazmat.primitives.hashes.SHA1" => Some("sha1".to_string()),
            _ => None,
        };
        let opted_out = keyword_arg(call, "usedforsecurity").is_some_and(|v| constant_truth(v) == Some(false));
        if let (Some(algorithm), false) = (algorithm, opted_out) {
            out.push(Finding::new(
                rules::SEC_WEAK_HASH,
                unit.span(call),
                format!("{} is not collision resistant", algorithm.to_uppercase()),
            ));
        }
    }

    // Non-cryptographic randomness flowing into a secret-looking sink.
    let mut sinks: Vec<(&Expr, String)> = Vec::new();
    for_each_stmt(&unit.syntax_root, &mut |stmt| {
        let (targets, value): (Vec<&Expr>, Option<&Expr>) = match stmt {
            Stmt::Assign(s) => (s.targets.iter().collect(), Some(&s.value)),
            Stmt::AnnAssign(s) => (vec![&s.target], s.value.as_deref()),
            Stmt::AugAssign(s) => (vec![&s.target], Some(&s.value)),
            _ => (Vec::new(), None),
        };
        if let Some(value) = value {
            if let Some(name) = targets.iter().filter_map(|t| target_name(t)).find(|n| heuristics.matches_name(n)) {
                sinks.push((value, name.to_string()));
            }
        }
        if let Some(parts) = function_parts(stmt) {
            if heuristics.matches_name(parts.name) {
                crate::pysource::walk::for_each_stmt_in_scope(parts.body, &mut |inner| {
                    if let Stmt::Return(ast::StmtReturn { value: Some(v), .. }) = inner {
                        sinks.push((v, parts.name.to_string()));
                    }
                });
            }
        }
    });
    for_each_expr(&unit.syntax_root, &mut |e| {
        if let Expr::Call(call) = e {
            for kw in &call.keywords {
                if let Some(arg) = kw.arg.as_ref().filter(|a| heuristics.matches_name(a)) {
                    sinks.push((&kw.value, arg.to_string()));
                }
            }
        }
    });
    let mut seen = std::collections::HashSet::new();
    for (value, name) in sinks {
        let mut found = Vec::new();
        random_calls_in(unit, value, &mut found);
        for call in found {
            let span = unit.span(call);
            if seen.insert(span.clone()) {
                out.push(Finding::new(
                    rules::SEC_INSECURE_RANDOM,
                    span,
                    format!("`random` is not cryptographically secure; `{name}` should use `secrets`"),
                ));
            }
        }
    }
    out
}

/// All source-level security checks (dependency manifests are separate).
pub fn analyze(unit: &SourceUnit, heuristics: &SecretHeuristics) -> Vec<Finding> {
    let mut out = detect_injection(unit);
    out.extend(detect_unsafe_deserialization(unit));
    out.extend(detect_weak_crypto(unit, heuristics));
    out.extend(detect_hardcoded_secrets(unit, heuristics));
    out
}
