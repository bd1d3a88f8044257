//! String building, I/O and recomputation in loops, and data-structure size.

use std::collections::{BTreeSet, HashSet};

use rustpython_parser::ast::{self, Expr, Operator, Stmt};
use serde::{Deserialize, Serialize};

use crate::findings::{rules, Finding};
use crate::maintainability::instance_attributes;
use crate::pysource::walk::{
    self, for_each_expr_in_scope, for_each_stmt_in_scope, for_each_subexpr, loop_parts, mutated_names, Visit,
};
use crate::pysource::{SourceUnit, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerformanceThresholds {
    pub max_class_attributes: usize,
    pub max_nesting_containers: usize,
    pub max_dict_literal_entries: usize,
}

impl Default for PerformanceThresholds {
    fn default() -> Self {
        Self {
            max_class_attributes: 15,
            max_nesting_containers: 3,
            max_dict_literal_entries: 50,
        }
    }
}

impl PerformanceThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_class_attributes == 0 || self.max_nesting_containers == 0 || self.max_dict_literal_entries == 0 {
            return Err("performance thresholds must be strictly positive".into());
        }
        Ok(())
    }
}

/// Module body plus every function body: the scopes loops live in.
fn scopes(unit: &SourceUnit) -> impl Iterator<Item = &[Stmt]> {
    std::iter::once(unit.syntax_root.as_slice()).chain(unit.function_index.iter().map(|f| f.body()))
}

fn loops_in(scope: &[Stmt]) -> Vec<&Stmt> {
    let mut out = Vec::new();
    for_each_stmt_in_scope(scope, &mut |s| {
        if walk::is_loop(s) {
            out.push(s);
        }
    });
    out
}

/// Statements executed by one iteration of the loop, without descending into
/// nested loops or scopes.
fn direct_body<'a>(body: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
    for stmt in body {
        out.push(stmt);
        if !walk::is_loop(stmt) && !walk::is_scope(stmt) {
            for block in walk::child_blocks(stmt) {
                direct_body(block, out);
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Evidence {
    Str,
    List,
}

fn value_evidence(value: &Expr) -> Option<Evidence> {
    match value {
        Expr::Constant(c) if matches!(c.value, ast::Constant::Str(_)) => Some(Evidence::Str),
        Expr::JoinedStr(_) => Some(Evidence::Str),
        Expr::Call(c) if matches!(&*c.func, Expr::Name(n) if n.id.as_str() == "str") => Some(Evidence::Str),
        Expr::List(_) | Expr::ListComp(_) => Some(Evidence::List),
        Expr::Call(c) if matches!(&*c.func, Expr::Name(n) if n.id.as_str() == "list") => Some(Evidence::List),
        _ => None,
    }
}

/// Names initialised from a string or list value somewhere in the scope.
fn typed_names(scope: &[Stmt], kind: Evidence) -> HashSet<&str> {
    let mut out = HashSet::new();
    for_each_stmt_in_scope(scope, &mut |stmt| {
        let (targets, value): (Vec<&Expr>, Option<&Expr>) = match stmt {
            Stmt::Assign(s) => (s.targets.iter().collect(), Some(&s.value)),
            Stmt::AnnAssign(s) => (vec![&s.target], s.value.as_deref()),
            _ => return,
        };
        if value.and_then(value_evidence) == Some(kind) {
            for t in targets {
                if let Expr::Name(n) = t {
                    out.insert(n.id.as_str());
                }
            }
        }
    });
    out
}

/// `name += rhs` or `name = name + rhs`: the accumulated name and the rhs.
fn accumulation(stmt: &Stmt) -> Option<(&str, &Expr)> {
    match stmt {
        Stmt::AugAssign(s) if s.op == Operator::Add => match &*s.target {
            Expr::Name(n) => Some((n.id.as_str(), &s.value)),
            _ => None,
        },
        Stmt::Assign(s) if s.targets.len() == 1 => {
            let (Expr::Name(target), Expr::BinOp(bin)) = (&s.targets[0], &*s.value) else { return None };
            match (&*bin.left, bin.op) {
                (Expr::Name(left), Operator::Add) if left.id == target.id => Some((target.id.as_str(), &bin.right)),
                _ => None,
            }
        }
        _ => None,
    }
}

pub fn detect_string_concat_in_loops(unit: &SourceUnit) -> Vec<Finding> {
    let mut out = Vec::new();
    for scope in scopes(unit) {
        let strings = typed_names(scope, Evidence::Str);
        if strings.is_empty() {
            continue;
        }
        for lp in loops_in(scope) {
            let Some((body, _)) = loop_parts(lp) else { continue };
            let mut stmts = Vec::new();
            direct_body(body, &mut stmts);
            let mut seen = HashSet::new();
            for stmt in stmts {
                if let Some((name, _)) = accumulation(stmt) {
                    if strings.contains(name) && seen.insert(name) {
                        out.push(Finding::new(
                            rules::PERF_STRING_CONCAT_LOOP,
                            unit.span(stmt),
                            format!("string `{name}` is rebuilt on every iteration; collect parts and `\"\".join` them"),
                        ));
                    }
                }
            }
        }
    }
    out
}

const IO_CALLS: &[&str] = &[
    "open",
    "io.open",
    "os.open",
    "codecs.open",
    "socket.socket",
    "socket.create_connection",
    "urllib.request.urlopen",
    "urllib2.urlopen",
    "http.client.HTTPConnection",
    "http.client.HTTPSConnection",
    "sqlite3.connect",
];

const HTTP_CLIENTS: &[&str] = &["requests", "httpx"];
const HTTP_VERBS: &[&str] = &["get", "post", "put", "patch", "delete", "head", "options", "request"];

fn is_io_call(unit: &SourceUnit, call: &ast::ExprCall) -> Option<String> {
    let callee = unit.bindings.resolve(&call.func)?;
    if IO_CALLS.contains(&callee.as_str()) {
        return Some(callee);
    }
    if let Some((module, verb)) = callee.split_once('.') {
        if HTTP_CLIENTS.contains(&module) && HTTP_VERBS.contains(&verb) {
            return Some(callee);
        }
    }
    matches!(&*call.func, Expr::Attribute(a) if a.attr.as_str() == "connect" || a.attr.as_str() == "urlopen")
        .then_some(callee)
}

const CHEAP_BUILTINS: &[&str] = &[
    "len", "abs", "min", "max", "int", "float", "str", "bool", "round", "isinstance", "type", "id", "hash", "ord",
    "chr", "range",
];

/// A call in a `while` condition whose inputs never change in the body.
fn invariant_condition_call<'a>(cond: &'a Expr, body: &[Stmt]) -> Option<&'a ast::ExprCall> {
    let changed = mutated_names(body);
    let mut found = None;
    for_each_subexpr(cond, &mut |e| {
        let Expr::Call(call) = e else { return };
        let Expr::Name(callee) = &*call.func else { return };
        if found.is_some() || call.args.is_empty() || changed.contains(callee.id.as_str()) {
            return;
        }
        let nested_call = call.args.iter().any(|a| matches!(a, Expr::Call(_)));
        if CHEAP_BUILTINS.contains(&callee.id.as_str()) && !nested_call {
            return;
        }
        let mut inputs_fixed = true;
        for arg in call.args.iter().chain(call.keywords.iter().map(|k| &k.value)) {
            for_each_subexpr(arg, &mut |a| {
                if let Expr::Name(n) = a {
                    inputs_fixed &= !changed.contains(n.id.as_str());
                }
            });
        }
        if inputs_fixed {
            found = Some(call);
        }
    });
    found
}

pub fn detect_loop_resource_issues(unit: &SourceUnit) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut io_seen: HashSet<Span> = HashSet::new();
    for scope in scopes(unit) {
        let lists = typed_names(scope, Evidence::List);
        for lp in loops_in(scope) {
            let Some((body, _)) = loop_parts(lp) else { continue };

            for_each_expr_in_scope(body, &mut |e| {
                if let Expr::Call(call) = e {
                    if let Some(callee) = is_io_call(unit, call) {
                        let span = unit.span(call);
                        if io_seen.insert(span.clone()) {
                            out.push(Finding::new(
                                rules::PERF_IO_IN_LOOP,
                                span,
                                format!("`{callee}` performs I/O on every iteration"),
                            ));
                        }
                    }
                }
            });

            if let Stmt::While(w) = lp {
                if let Some(call) = invariant_condition_call(&w.test, body) {
                    out.push(Finding::new(
                        rules::PERF_LOOP_INVARIANT_CALL,
                        unit.span(call),
                        "loop condition recomputes a call whose inputs do not change; hoist it".to_string(),
                    ));
                }
            }

            let mut stmts = Vec::new();
            direct_body(body, &mut stmts);
            let mut grown = HashSet::new();
            for stmt in stmts {
                let Stmt::Assign(_) = stmt else { continue };
                if let Some((name, rhs)) = accumulation(stmt) {
                    let list_rhs = matches!(rhs, Expr::List(_) | Expr::ListComp(_));
                    if (list_rhs || lists.contains(name)) && grown.insert(name) {
                        out.push(Finding::new(
                            rules::PERF_CONTAINER_CONCAT_LOOP,
                            unit.span(stmt),
                            format!("list `{name}` is copied on every iteration; use append or extend"),
                        ));
                    }
                }
            }
        }
    }
    out
}

fn is_container(e: &Expr) -> bool {
    matches!(e, Expr::List(_) | Expr::Tuple(_) | Expr::Set(_) | Expr::Dict(_))
}

fn container_children(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::List(l) => l.elts.iter().collect(),
        Expr::Tuple(t) => t.elts.iter().collect(),
        Expr::Set(s) => s.elts.iter().collect(),
        Expr::Dict(d) => d.keys.iter().flatten().chain(&d.values).collect(),
        _ => Vec::new(),
    }
}

/// Depth of directly nested container literals (`[1]` is 1).
pub fn literal_depth(e: &Expr) -> usize {
    if !is_container(e) {
        return 0;
    }
    1 + container_children(e).into_iter().map(literal_depth).max().unwrap_or(0)
}

struct LiteralScan<'u> {
    unit: &'u SourceUnit,
    th: &'u PerformanceThresholds,
    out: Vec<Finding>,
}

impl LiteralScan<'_> {
    fn check_dict(&mut self, e: &Expr) {
        if let Expr::Dict(d) = e {
            if d.values.len() > self.th.max_dict_literal_entries {
                self.out.push(Finding::new(
                    rules::PERF_LARGE_DICT,
                    self.unit.span(e),
                    format!(
                        "dictionary literal has {} entries (limit {}); load large tables from data",
                        d.values.len(),
                        self.th.max_dict_literal_entries
                    ),
                ));
            }
        }
    }

    /// Walk a chain of nested literals without reporting their depth again;
    /// dictionary size is still checked at every level.
    fn descend(&mut self, e: &Expr) {
        self.check_dict(e);
        for child in container_children(e) {
            if is_container(child) {
                self.descend(child);
            } else {
                self.visit_expr(child);
            }
        }
    }
}

impl<'a> Visit<'a> for LiteralScan<'_> {
    fn visit_expr(&mut self, e: &'a Expr) {
        if !is_container(e) {
            walk::walk_expr(self, e);
            return;
        }
        let depth = literal_depth(e);
        if depth > self.th.max_nesting_containers {
            self.out.push(Finding::new(
                rules::PERF_DEEP_NESTING_LITERAL,
                self.unit.span(e),
                format!("literal nests containers {depth} deep (limit {})", self.th.max_nesting_containers),
            ));
        }
        self.descend(e);
    }
}

pub fn detect_data_structure_issues(unit: &SourceUnit, th: &PerformanceThresholds) -> Vec<Finding> {
    let mut scan = LiteralScan { unit, th, out: Vec::new() };
    scan.visit_body(&unit.syntax_root);
    let mut out = scan.out;

    for class in &unit.class_index {
        let mut attrs: BTreeSet<&str> = instance_attributes(unit, &class.qualified_name);
        for stmt in class.body() {
            let targets: Vec<&Expr> = match stmt {
                Stmt::Assign(s) => s.targets.iter().collect(),
                Stmt::AnnAssign(s) => vec![&s.target],
                _ => continue,
            };
            attrs.extend(targets.into_iter().filter_map(|t| match t {
                Expr::Name(n) => Some(n.id.as_str()),
                _ => None,
            }));
        }
        if attrs.len() > th.max_class_attributes {
            out.push(Finding::new(
                rules::PERF_TOO_MANY_CLASS_ATTRIBUTES,
                Span::line(unit.file_label.clone(), class.span.start_line),
                format!(
                    "class `{}` defines {} attributes (limit {})",
                    class.qualified_name,
                    attrs.len(),
                    th.max_class_attributes
                ),
            ));
        }
    }
    out
}

pub fn analyze(unit: &SourceUnit, th: &PerformanceThresholds) -> Vec<Finding> {
    let mut out = detect_string_concat_in_loops(unit);
    out.extend(detect_loop_resource_issues(unit));
    out.extend(detect_data_structure_issues(unit, th));
    out
}
