//! Complexity, dead code, structure, and style/documentation rules.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use rustpython_parser::ast::{Expr, ExprContext, Stmt};
use serde::{Deserialize, Serialize};

use crate::findings::{rules, Finding};
use crate::pysource::walk::{
    self, for_each_expr, for_each_expr_in_scope, for_each_stmt, for_each_stmt_in_scope, function_parts,
    Visit,
};
use crate::pysource::{string_literal, FunctionInfo, SourceUnit, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaintainabilityThresholds {
    pub cyclomatic_medium: u32,
    pub cyclomatic_high: u32,
    pub max_parameters: usize,
    pub max_instance_attributes: usize,
    pub max_file_loc: usize,
    pub max_branches: usize,
    pub max_returns: usize,
    pub max_nesting_depth: usize,
    /// Modules longer than this must carry a docstring.
    pub module_docstring_min_loc: usize,
}

impl Default for MaintainabilityThresholds {
    fn default() -> Self {
        Self {
            cyclomatic_medium: 10,
            cyclomatic_high: 20,
            max_parameters: 5,
            max_instance_attributes: 10,
            max_file_loc: 1000,
            max_branches: 12,
            max_returns: 6,
            max_nesting_depth: 4,
            module_docstring_min_loc: 50,
        }
    }
}

impl MaintainabilityThresholds {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.cyclomatic_medium as usize,
            self.cyclomatic_high as usize,
            self.max_parameters,
            self.max_instance_attributes,
            self.max_file_loc,
            self.max_branches,
            self.max_returns,
            self.max_nesting_depth,
            self.module_docstring_min_loc,
        ];
        if all.contains(&0) {
            return Err("maintainability thresholds must be strictly positive".into());
        }
        if self.cyclomatic_medium >= self.cyclomatic_high {
            return Err("cyclomatic_medium must be below cyclomatic_high".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Complexity

#[derive(Default)]
struct DecisionCounter {
    decisions: u32,
}

impl<'a> Visit<'a> for DecisionCounter {
    fn visit_stmt(&mut self, stmt: &'a Stmt) {
        if walk::is_scope(stmt) {
            return;
        }
        self.decisions += match stmt {
            // `elif` is a nested `if` in the else-branch, so it counts here too.
            Stmt::If(_) | Stmt::For(_) | Stmt::AsyncFor(_) | Stmt::While(_) => 1,
            Stmt::Try(s) => s.handlers.len() as u32,
            Stmt::TryStar(s) => s.handlers.len() as u32,
            Stmt::Match(s) => s.cases.len() as u32,
            _ => 0,
        };
        walk::walk_stmt(self, stmt);
    }

    fn visit_expr(&mut self, expr: &'a Expr) {
        self.decisions += match expr {
            Expr::BoolOp(e) => e.values.len().saturating_sub(1) as u32,
            Expr::IfExp(_) => 1,
            Expr::ListComp(e) => e.generators.iter().map(|g| g.ifs.len() as u32).sum(),
            Expr::SetComp(e) => e.generators.iter().map(|g| g.ifs.len() as u32).sum(),
            Expr::DictComp(e) => e.generators.iter().map(|g| g.ifs.len() as u32).sum(),
            Expr::GeneratorExp(e) => e.generators.iter().map(|g| g.ifs.len() as u32).sum(),
            _ => 0,
        };
        walk::walk_expr(self, expr);
    }
}

/// McCabe complexity of a statement list: 1 + decision points, not counting
/// nested function or class bodies.
pub fn body_complexity(body: &[Stmt]) -> u32 {
    let mut counter = DecisionCounter::default();
    counter.visit_body(body);
    1 + counter.decisions
}

pub fn cyclomatic_complexity(function: &FunctionInfo) -> u32 {
    body_complexity(function.body())
}

fn methods_of<'u>(unit: &'u SourceUnit, class_qualified: &'u str) -> impl Iterator<Item = &'u FunctionInfo> {
    unit.function_index.iter().filter(move |f| {
        f.class_name.is_some()
            && f.qualified_name
                .strip_prefix(class_qualified)
                .and_then(|rest| rest.strip_prefix('.'))
                .is_some_and(|rest| !rest.contains('.'))
    })
}

pub fn detect_complexity_issues(unit: &SourceUnit, th: &MaintainabilityThresholds) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut complexity = BTreeMap::new();
    for f in &unit.function_index {
        let cc = cyclomatic_complexity(f);
        complexity.insert(f.qualified_name.as_str(), cc);
        if cc <= th.cyclomatic_medium {
            continue;
        }
        let (limit, escalate) = if cc > th.cyclomatic_high {
            (th.cyclomatic_high, true)
        } else {
            (th.cyclomatic_medium, false)
        };
        let finding = Finding::new(
            rules::MAINT_CYCLOMATIC,
            unit.header_span(&f.span),
            format!("`{}` has cyclomatic complexity {cc} (limit {limit})", f.qualified_name),
        );
        out.push(if escalate { finding.escalated() } else { finding });
    }
    for class in &unit.class_index {
        let worst = methods_of(unit, &class.qualified_name)
            .filter_map(|m| complexity.get(m.qualified_name.as_str()).map(|cc| (*cc, m)))
            .max_by_key(|(cc, _)| *cc);
        if let Some((cc, method)) = worst.filter(|(cc, _)| *cc > th.cyclomatic_high) {
            out.push(Finding::new(
                rules::MAINT_COMPLEX_CLASS,
                unit.header_span(&class.span),
                format!(
                    "class `{}` has an overly complex method `{}` (complexity {cc})",
                    class.qualified_name, method.name
                ),
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Dead code

fn loaded_names(body: &[Stmt]) -> HashSet<&str> {
    let mut names = HashSet::new();
    for_each_expr(body, &mut |e| {
        if let Expr::Name(n) = e {
            if !matches!(n.ctx, ExprContext::Store) {
                names.insert(n.id.as_str());
            }
        }
    });
    names
}

/// Names listed in a module-level `__all__`.
fn explicit_exports(body: &[Stmt]) -> HashSet<&str> {
    let mut out = HashSet::new();
    for stmt in body {
        let (targets, value): (Vec<&Expr>, Option<&Expr>) = match stmt {
            Stmt::Assign(s) => (s.targets.iter().collect(), Some(&s.value)),
            Stmt::AnnAssign(s) => (vec![&s.target], s.value.as_deref()),
            Stmt::AugAssign(s) => (vec![&s.target], Some(&s.value)),
            _ => continue,
        };
        let is_all = targets
            .iter()
            .any(|t| matches!(t, Expr::Name(n) if n.id.as_str() == "__all__"));
        if let (true, Some(Expr::List(_) | Expr::Tuple(_))) = (is_all, value) {
            let elts = match value {
                Some(Expr::List(l)) => &l.elts,
                Some(Expr::Tuple(t)) => &t.elts,
                _ => unreachable!(),
            };
            out.extend(elts.iter().filter_map(string_literal));
        }
    }
    out
}

fn is_exempt_name(name: &str) -> bool {
    name.starts_with('_')
}

fn is_private_name(name: &str) -> bool {
    name.starts_with('_') && !(name.starts_with("__") && name.ends_with("__"))
}

pub fn detect_dead_code(unit: &SourceUnit) -> Vec<Finding> {
    let root = &unit.syntax_root;
    let used = loaded_names(root);
    let exports = explicit_exports(root);
    let is_package_init = unit.file_label.ends_with("__init__.py");
    // Module state rebound through `global` is treated as shared.
    let mut global_decls = HashSet::new();
    for_each_stmt(root, &mut |stmt| {
        if let Stmt::Global(g) = stmt {
            global_decls.extend(g.names.iter().map(|n| n.as_str()));
        }
    });
    let unused = |name: &str| {
        !used.contains(name) && !exports.contains(name) && !global_decls.contains(name) && !is_exempt_name(name)
    };
    let mut out = Vec::new();
    let mut reported: HashSet<(&str, String)> = HashSet::new();

    // Imports anywhere in the file.
    let mut imports = Vec::new();
    for_each_stmt(root, &mut |stmt| {
        if matches!(stmt, Stmt::Import(_) | Stmt::ImportFrom(_)) {
            imports.push(stmt);
        }
    });
    for stmt in imports {
        let aliases = match stmt {
            Stmt::Import(s) => &s.names,
            Stmt::ImportFrom(s) => {
                if s.module.as_ref().is_some_and(|m| m.as_str() == "__future__") {
                    continue;
                }
                &s.names
            }
            _ => unreachable!(),
        };
        for alias in aliases {
            if alias.name.as_str() == "*" || is_package_init {
                continue;
            }
            // `import x as x` is an explicit re-export.
            if alias.asname.as_ref().is_some_and(|a| a.as_str() == alias.name.as_str()) {
                continue;
            }
            let bound = match &alias.asname {
                Some(a) => a.to_string(),
                None => alias.name.split('.').next().unwrap_or_default().to_string(),
            };
            if unused(&bound) && reported.insert((rules::MAINT_UNUSED_IMPORT, bound.clone())) {
                out.push(Finding::new(
                    rules::MAINT_UNUSED_IMPORT,
                    unit.span(alias),
                    format!("`{}` is imported but never used", alias.name),
                ));
            }
        }
    }

    // Module-level definitions and variables: public names are importable,
    // so only private ones can be proven dead from a single file.
    let dead_private = |name: &str| is_private_name(name) && !used.contains(name) && !exports.contains(name) && !global_decls.contains(name);
    for_each_stmt_in_scope(root, &mut |stmt| {
        if let Some(parts) = function_parts(stmt) {
            let name = parts.name;
            if dead_private(name) {
                out.push(Finding::new(
                    rules::MAINT_UNUSED_FUNCTION,
                    unit.header_span(&unit.span(stmt)),
                    format!("private function `{name}` is never used"),
                ));
            }
            return;
        }
        match stmt {
            Stmt::ClassDef(c) => {
                if dead_private(&c.name) {
                    out.push(Finding::new(
                        rules::MAINT_UNUSED_CLASS,
                        unit.header_span(&unit.span(stmt)),
                        format!("private class `{}` is never used", c.name),
                    ));
                }
            }
            _ => {
                for (name, target) in simple_assignment_targets(stmt) {
                    if dead_private(name) && reported.insert((rules::MAINT_UNUSED_VARIABLE, name.to_string())) {
                        out.push(Finding::new(
                            rules::MAINT_UNUSED_VARIABLE,
                            unit.span(target),
                            format!("private variable `{name}` is assigned but never used"),
                        ));
                    }
                }
            }
        }
    });

    // Function-local variables.
    for f in &unit.function_index {
        let body = f.body();
        let local_used = loaded_names(body);
        let mut declared_outer = HashSet::new();
        for_each_stmt_in_scope(body, &mut |stmt| match stmt {
            Stmt::Global(g) => declared_outer.extend(g.names.iter().map(|n| n.as_str())),
            Stmt::Nonlocal(n) => declared_outer.extend(n.names.iter().map(|n| n.as_str())),
            _ => {}
        });
        let mut seen = HashSet::new();
        for_each_stmt_in_scope(body, &mut |stmt| {
            for (name, target) in simple_assignment_targets(stmt) {
                if !local_used.contains(name)
                    && !declared_outer.contains(name)
                    && !is_exempt_name(name)
                    && seen.insert(name)
                {
                    out.push(Finding::new(
                        rules::MAINT_UNUSED_VARIABLE,
                        unit.span(target),
                        format!("local variable `{name}` in `{}` is assigned but never used", f.qualified_name),
                    ));
                }
            }
        });
    }
    out
}

/// Plain `name = value` / `name: T = value` bindings (tuple unpacking excluded).
fn simple_assignment_targets(stmt: &Stmt) -> Vec<(&str, &Expr)> {
    match stmt {
        Stmt::Assign(s) => s
            .targets
            .iter()
            .filter_map(|t| match t {
                Expr::Name(n) => Some((n.id.as_str(), t)),
                _ => None,
            })
            .collect(),
        Stmt::AnnAssign(s) if s.value.is_some() => match &*s.target {
            Expr::Name(n) => vec![(n.id.as_str(), &*s.target)],
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Structure

/// Distinct attribute names assigned through the receiver of each method.
pub(crate) fn instance_attributes<'u>(unit: &'u SourceUnit, class_qualified: &'u str) -> BTreeSet<&'u str> {
    let mut attrs = BTreeSet::new();
    for method in methods_of(unit, class_qualified) {
        let Some(receiver) = method.receiver_name() else { continue };
        for_each_expr_in_scope(method.body(), &mut |e| {
            if let Expr::Attribute(a) = e {
                if matches!(a.ctx, ExprContext::Store)
                    && matches!(&*a.value, Expr::Name(n) if n.id.as_str() == receiver)
                {
                    attrs.insert(a.attr.as_str());
                }
            }
        });
    }
    attrs
}

/// Branches in the pylint sense: like decision points, but an `else` or
/// `finally` clause is a branch of its own (an `elif` is not).
pub fn branch_count(body: &[Stmt]) -> usize {
    let clause = |orelse: &[Stmt]| usize::from(!orelse.is_empty());
    let mut n = 0;
    for_each_stmt_in_scope(body, &mut |stmt| {
        n += match stmt {
            Stmt::If(s) => 1 + usize::from(!s.orelse.is_empty() && !matches!(s.orelse.as_slice(), [Stmt::If(_)])),
            Stmt::For(s) => 1 + clause(&s.orelse),
            Stmt::AsyncFor(s) => 1 + clause(&s.orelse),
            Stmt::While(s) => 1 + clause(&s.orelse),
            Stmt::Try(s) => s.handlers.len() + clause(&s.orelse) + clause(&s.finalbody),
            Stmt::TryStar(s) => s.handlers.len() + clause(&s.orelse) + clause(&s.finalbody),
            Stmt::Match(s) => s.cases.len(),
            _ => 0,
        };
    });
    n
}

pub fn return_count(body: &[Stmt]) -> usize {
    let mut n = 0;
    for_each_stmt_in_scope(body, &mut |stmt| n += usize::from(matches!(stmt, Stmt::Return(_))));
    n
}

/// Deepest nesting of compound statements; an `elif` chain stays at one level.
pub fn nesting_depth(body: &[Stmt]) -> usize {
    fn depth(stmts: &[Stmt], level: usize) -> usize {
        stmts
            .iter()
            .map(|stmt| match stmt {
                Stmt::If(s) => {
                    let inner = depth(&s.body, level + 1);
                    let orelse = match s.orelse.as_slice() {
                        [elif @ Stmt::If(_)] => depth(std::slice::from_ref(elif), level),
                        other => depth(other, level + 1),
                    };
                    inner.max(orelse)
                }
                s if walk::is_scope(s) => level,
                s => {
                    let blocks = walk::child_blocks(s);
                    if blocks.is_empty() {
                        level
                    } else {
                        blocks.into_iter().map(|b| depth(b, level + 1)).max().unwrap_or(level)
                    }
                }
            })
            .max()
            .unwrap_or(level)
    }
    depth(body, 0)
}

pub fn detect_structure_issues(unit: &SourceUnit, th: &MaintainabilityThresholds) -> Vec<Finding> {
    let mut out = Vec::new();
    for f in &unit.function_index {
        let header = unit.header_span(&f.span);
        let params = f.explicit_parameter_count();
        if params > th.max_parameters {
            out.push(Finding::new(
                rules::MAINT_TOO_MANY_ARGS,
                header.clone(),
                format!("`{}` takes {params} parameters (limit {})", f.qualified_name, th.max_parameters),
            ));
        }
        let body = f.body();
        let branches = branch_count(body);
        if branches > th.max_branches {
            out.push(Finding::new(
                rules::MAINT_TOO_MANY_BRANCHES,
                header.clone(),
                format!("`{}` has {branches} branches (limit {})", f.qualified_name, th.max_branches),
            ));
        }
        let returns = return_count(body);
        if returns > th.max_returns {
            out.push(Finding::new(
                rules::MAINT_TOO_MANY_RETURNS,
                header.clone(),
                format!("`{}` has {returns} return statements (limit {})", f.qualified_name, th.max_returns),
            ));
        }
        let depth = nesting_depth(body);
        if depth > th.max_nesting_depth {
            out.push(Finding::new(
                rules::MAINT_DEEP_NESTING,
                header,
                format!("`{}` nests blocks {depth} deep (limit {})", f.qualified_name, th.max_nesting_depth),
            ));
        }
    }
    for class in &unit.class_index {
        let attrs = instance_attributes(unit, &class.qualified_name);
        if attrs.len() > th.max_instance_attributes {
            out.push(Finding::new(
                rules::MAINT_TOO_MANY_ATTRIBUTES,
                unit.header_span(&class.span),
                format!(
                    "class `{}` has {} instance attributes (limit {})",
                    class.qualified_name,
                    attrs.len(),
                    th.max_instance_attributes
                ),
            ));
        }
    }
    if unit.line_count > th.max_file_loc {
        out.push(Finding::new(
            rules::MAINT_LARGE_FILE,
            unit.file_span(),
            format!("file has {} lines (limit {})", unit.line_count, th.max_file_loc),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Style and documentation

fn snake_case() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^_{0,2}[a-z][a-z0-9_]*$").unwrap())
}

fn upper_case() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^_{0,2}[A-Z][A-Z0-9_]*$").unwrap())
}

fn cap_words() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^_{0,2}[A-Z][a-zA-Z0-9]*$").unwrap())
}

const FRAMEWORK_METHOD_NAMES: &[&str] = &["setUp", "tearDown", "setUpClass", "tearDownClass", "setUpModule", "tearDownModule"];

fn is_public_path(qualified: &str) -> bool {
    qualified.split('.').all(|part| !part.starts_with('_'))
}

fn exempt_from_docstring(f: &FunctionInfo) -> bool {
    f.decorators.iter().any(|d| {
        d == "overload" || d == "typing.overload" || d.ends_with(".setter") || d.ends_with(".deleter")
    })
}

#[derive(Clone, Copy, PartialEq)]
enum NameScope {
    Module,
    Class,
    Function,
}

fn variable_name_ok(name: &str, scope: NameScope) -> bool {
    if name == "_" || snake_case().is_match(name) {
        return true;
    }
    match scope {
        NameScope::Function => false,
        NameScope::Class => upper_case().is_match(name),
        NameScope::Module => upper_case().is_match(name) || cap_words().is_match(name),
    }
}

/// Names bound by assignment-like statements in one scope, with the
/// expression that binds them. Loop targets are flagged separately.
fn bound_names(stmt: &Stmt) -> Vec<(&str, &Expr, bool)> {
    fn names_in<'a>(target: &'a Expr, is_loop: bool, out: &mut Vec<(&'a str, &'a Expr, bool)>) {
        match target {
            Expr::Name(n) => out.push((n.id.as_str(), target, is_loop)),
            Expr::Tuple(t) => t.elts.iter().for_each(|e| names_in(e, is_loop, out)),
            Expr::List(l) => l.elts.iter().for_each(|e| names_in(e, is_loop, out)),
            Expr::Starred(s) => names_in(&s.value, is_loop, out),
            _ => {}
        }
    }
    let mut out = Vec::new();
    match stmt {
        Stmt::Assign(s) => s.targets.iter().for_each(|t| names_in(t, false, &mut out)),
        Stmt::AnnAssign(s) => names_in(&s.target, false, &mut out),
        Stmt::AugAssign(s) => names_in(&s.target, false, &mut out),
        Stmt::For(s) => names_in(&s.target, true, &mut out),
        Stmt::AsyncFor(s) => names_in(&s.target, true, &mut out),
        Stmt::With(s) => s
            .items
            .iter()
            .filter_map(|i| i.optional_vars.as_deref())
            .for_each(|t| names_in(t, false, &mut out)),
        Stmt::AsyncWith(s) => s
            .items
            .iter()
            .filter_map(|i| i.optional_vars.as_deref())
            .for_each(|t| names_in(t, false, &mut out)),
        _ => {}
    }
    out
}

pub fn detect_style_issues(unit: &SourceUnit, th: &MaintainabilityThresholds) -> Vec<Finding> {
    let mut out = Vec::new();
    if unit.line_count > th.module_docstring_min_loc && unit.module_docstring().is_none() {
        out.push(Finding::new(
            rules::MAINT_MISSING_DOCSTRING,
            Span::line(unit.file_label.clone(), 1),
            format!("module of {} lines has no docstring", unit.line_count),
        ));
    }
    for f in &unit.function_index {
        let header = unit.header_span(&f.span);
        if !f.is_nested && !f.has_docstring && is_public_path(&f.qualified_name) && !exempt_from_docstring(f) {
            out.push(Finding::new(
                rules::MAINT_MISSING_DOCSTRING,
                header.clone(),
                format!("public function `{}` has no docstring", f.qualified_name),
            ));
        }
        let name_ok = f.is_dunder()
            || snake_case().is_match(&f.name)
            || (f.is_method() && FRAMEWORK_METHOD_NAMES.contains(&f.name.as_str()));
        if !name_ok {
            out.push(Finding::new(
                rules::MAINT_NAMING,
                header,
                format!("function name `{}` is not lower_snake_case", f.name),
            ));
        }
    }
    for c in &unit.class_index {
        let header = unit.header_span(&c.span);
        if !c.is_nested && !c.has_docstring && is_public_path(&c.qualified_name) {
            out.push(Finding::new(
                rules::MAINT_MISSING_DOCSTRING,
                header.clone(),
                format!("public class `{}` has no docstring", c.qualified_name),
            ));
        }
        if !cap_words().is_match(&c.name) {
            out.push(Finding::new(
                rules::MAINT_NAMING,
                header,
                format!("class name `{}` is not CapWords", c.name),
            ));
        }
    }

    let mut check_scope = |body: &[Stmt], scope: NameScope, label: &str| {
        let mut seen = HashSet::new();
        for_each_stmt_in_scope(body, &mut |stmt| {
            for (name, target, is_loop) in bound_names(stmt) {
                let single_letter_loop = is_loop && name.chars().count() == 1;
                if single_letter_loop || variable_name_ok(name, scope) || !seen.insert(name) {
                    continue;
                }
                out.push(Finding::new(
                    rules::MAINT_NAMING,
                    unit.span(target),
                    format!("variable name `{name}` in {label} is not lower_snake_case"),
                ));
            }
        });
    };
    check_scope(&unit.syntax_root, NameScope::Module, "module scope");
    for c in &unit.class_index {
        check_scope(c.body(), NameScope::Class, &format!("class `{}`", c.qualified_name));
    }
    for f in &unit.function_index {
        check_scope(f.body(), NameScope::Function, &format!("`{}`", f.qualified_name));
    }
    out
}

/// Combined maintainability pass.
pub fn analyze(unit: &SourceUnit, th: &MaintainabilityThresholds) -> Vec<Finding> {
    let mut out = detect_complexity_issues(unit, th);
    out.extend(detect_dead_code(unit));
    out.extend(detect_structure_issues(unit, th));
    out.extend(detect_style_issues(unit, th));
    out
}
