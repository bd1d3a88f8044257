//! Exception handling, resource cleanup, locking, loop termination and
//! type-safety checks.

mod locks;
mod type_report;
mod types;

use std::collections::HashSet;

use rustpython_parser::ast::{self, Expr, Stmt};

use crate::findings::{rules, Finding};
use crate::pysource::walk::{
    self, for_each_expr, for_each_expr_in_scope, for_each_stmt, for_each_stmt_in_scope, mutated_names,
};
use crate::pysource::{constant_truth, SourceUnit};

pub use locks::detect_concurrency_issues;
pub use type_report::{parse_type_report, TypeReport, TypeReportEntry};
pub use types::detect_type_safety_issues;

const LOGGING_METHODS: &[&str] = &[
    "debug", "info", "warning", "warn", "error", "exception", "critical", "log", "print_exc", "format_exc",
];

fn raises(body: &[Stmt]) -> bool {
    let mut found = false;
    for_each_stmt_in_scope(body, &mut |s| found |= matches!(s, Stmt::Raise(_)));
    found
}

fn logs(body: &[Stmt]) -> bool {
    let mut found = false;
    for_each_expr_in_scope(body, &mut |e| {
        if let Expr::Call(c) = e {
            if let Expr::Attribute(a) = &*c.func {
                found |= LOGGING_METHODS.contains(&a.attr.as_str());
            }
        }
    });
    found
}

fn is_pass_only(body: &[Stmt]) -> bool {
    body.iter().all(|s| match s {
        Stmt::Pass(_) => true,
        Stmt::Expr(e) => matches!(&*e.value, Expr::Constant(c) if matches!(c.value, ast::Constant::Ellipsis)),
        _ => false,
    })
}

fn is_broad(type_: &Expr) -> bool {
    match type_ {
        Expr::Name(n) => matches!(n.id.as_str(), "Exception" | "BaseException"),
        Expr::Attribute(a) => matches!(a.attr.as_str(), "Exception" | "BaseException")
            && matches!(&*a.value, Expr::Name(n) if n.id.as_str() == "builtins"),
        Expr::Tuple(t) => t.elts.iter().any(is_broad),
        _ => false,
    }
}

fn handler_finding(unit: &SourceUnit, handler: &ast::ExceptHandlerExceptHandler) -> Option<Finding> {
    if raises(&handler.body) {
        return None;
    }
    let header = unit.header_span(&unit.span_of(handler.range));
    match handler.type_.as_deref() {
        None => Some(Finding::new(
            rules::REL_BARE_EXCEPT,
            header,
            "bare `except:` also catches KeyboardInterrupt and SystemExit",
        )),
        Some(_) if is_pass_only(&handler.body) => Some(Finding::new(
            rules::REL_EMPTY_EXCEPT,
            header,
            "exception handler silently discards the error",
        )),
        Some(t) if is_broad(t) && !logs(&handler.body) => Some(Finding::new(
            rules::REL_BROAD_EXCEPT,
            header,
            "catching the broadest exception type without logging or re-raising",
        )),
        Some(_) => None,
    }
}

const OPEN_CALLS: &[&str] = &["open", "io.open", "codecs.open"];

/// Uses of `name` that hand off or end its lifetime.
fn is_released(scope: &[Stmt], name: &str) -> bool {
    let is_name = |e: &Expr| matches!(e, Expr::Name(n) if n.id.as_str() == name);
    let mut released = false;
    for_each_stmt(scope, &mut |stmt| match stmt {
        Stmt::With(w) => released |= w.items.iter().any(|i| mentions(&i.context_expr, name)),
        Stmt::AsyncWith(w) => released |= w.items.iter().any(|i| mentions(&i.context_expr, name)),
        Stmt::Return(ast::StmtReturn { value: Some(v), .. }) => released |= hands_off(v, name),
        Stmt::Assign(a) => {
            // Ownership moves into an attribute or container.
            released |= is_name(&a.value) && a.targets.iter().any(|t| !matches!(t, Expr::Name(_)));
        }
        _ => {}
    });
    for_each_expr(scope, &mut |e| match e {
        Expr::Call(c) => {
            if let Expr::Attribute(a) = &*c.func {
                released |= a.attr.as_str() == "close" && is_name(&a.value);
            }
        }
        Expr::Yield(ast::ExprYield { value: Some(v), .. }) => released |= hands_off(v, name),
        _ => {}
    });
    released
}

/// The value is the handle itself or a tuple/list holding it.
fn hands_off(expr: &Expr, name: &str) -> bool {
    match expr {
        Expr::Name(n) => n.id.as_str() == name,
        Expr::Tuple(t) => t.elts.iter().any(|e| hands_off(e, name)),
        Expr::List(l) => l.elts.iter().any(|e| hands_off(e, name)),
        _ => false,
    }
}

fn mentions(expr: &Expr, name: &str) -> bool {
    let mut found = false;
    walk::for_each_subexpr(expr, &mut |e| {
        found |= matches!(e, Expr::Name(n) if n.id.as_str() == name);
    });
    found
}

pub fn detect_exception_issues(unit: &SourceUnit) -> Vec<Finding> {
    let mut out = Vec::new();
    for_each_stmt(&unit.syntax_root, &mut |stmt| {
        if let Some(t) = walk::try_parts(stmt) {
            out.extend(t.handlers.iter().filter_map(|h| handler_finding(unit, h)));
        }
    });

    let scopes = std::iter::once(unit.syntax_root.as_slice()).chain(unit.function_index.iter().map(|f| f.body()));
    for scope in scopes {
        for_each_stmt_in_scope(scope, &mut |stmt| {
            let Stmt::Assign(a) = stmt else { return };
            let [Expr::Name(target)] = a.targets.as_slice() else { return };
            let Some(callee) = unit.bindings.callee(&a.value) else { return };
            if OPEN_CALLS.contains(&callee.as_str()) && !is_released(scope, target.id.as_str()) {
                out.push(Finding::new(
                    rules::REL_UNCLOSED_RESOURCE,
                    unit.span(stmt),
                    format!("`{}` is opened but never closed; use a `with` block", target.id),
                ));
            }
        });
    }
    out
}

const EXIT_CALLS: &[&str] = &["sys.exit", "exit", "quit", "os._exit", "os.abort"];

/// Ways out of a loop body other than the condition turning false.
fn has_exit(unit: &SourceUnit, body: &[Stmt]) -> bool {
    fn breaks(body: &[Stmt]) -> bool {
        body.iter().any(|s| match s {
            Stmt::Break(_) => true,
            s if walk::is_loop(s) || walk::is_scope(s) => false,
            s => walk::child_blocks(s).into_iter().any(breaks),
        })
    }
    let mut exits = breaks(body);
    for_each_stmt_in_scope(body, &mut |s| exits |= matches!(s, Stmt::Return(_) | Stmt::Raise(_)));
    for_each_expr_in_scope(body, &mut |e| match e {
        Expr::Call(_) => {
            exits |= unit.bindings.callee(e).is_some_and(|c| EXIT_CALLS.contains(&c.as_str()));
        }
        Expr::Yield(_) | Expr::YieldFrom(_) => exits = true,
        _ => {}
    });
    exits
}

const PURE_BUILTINS: &[&str] = &["len", "abs", "min", "max", "int", "float", "str", "bool", "isinstance"];

pub fn detect_infinite_loops(unit: &SourceUnit) -> Vec<Finding> {
    let mut out = Vec::new();
    for_each_stmt(&unit.syntax_root, &mut |stmt| {
        let Stmt::While(w) = stmt else { return };
        if has_exit(unit, &w.body) {
            return;
        }
        let header = unit.header_span(&unit.span(stmt));
        if constant_truth(&w.test) == Some(true) {
            out.push(Finding::new(
                rules::REL_INFINITE_LOOP,
                header,
                "`while True` loop has no break, return or raise",
            ));
            return;
        }
        let mut names = HashSet::new();
        let mut opaque = false;
        walk::for_each_subexpr(&w.test, &mut |e| match e {
            Expr::Name(n) => {
                names.insert(n.id.as_str());
            }
            // Attribute and item state can change outside this body.
            Expr::Attribute(_) | Expr::Subscript(_) | Expr::Await(_) => opaque = true,
            Expr::Call(c) => {
                let pure = matches!(&*c.func, Expr::Name(n) if PURE_BUILTINS.contains(&n.id.as_str()));
                opaque |= !pure;
            }
            _ => {}
        });
        let changed = mutated_names(&w.body);
        if !opaque && names.iter().all(|n| !changed.contains(n)) {
            let mut listed: Vec<_> = names.into_iter().filter(|n| !PURE_BUILTINS.contains(n)).collect();
            listed.sort_unstable();
            out.push(Finding::new(
                rules::REL_UNCHANGING_LOOP_CONDITION,
                header,
                format!("loop condition depends on {} which the body never changes", listed.join(", ")),
            ));
        }
    });
    out
}

pub fn analyze(unit: &SourceUnit) -> Vec<Finding> {
    let mut out = detect_exception_issues(unit);
    out.extend(detect_concurrency_issues(unit));
    out.extend(detect_infinite_loops(unit));
    out.extend(detect_type_safety_issues(unit));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::findings::Severity;
    use crate::pysource::parse_source;
    use proptest::prelude::*;

    fn unit(src: &str) -> SourceUnit {
        parse_source("r.py", src).expect("fixture parses")
    }

    fn ids(found: &[Finding]) -> Vec<(&str, Severity)> {
        found.iter().map(|f| (f.rule_id.as_str(), f.severity)).collect()
    }

    #[test]
    fn bare_and_empty_collapse_to_one() {
        let found = detect_exception_issues(&unit("try: f()\nexcept: pass\n"));
        assert_eq!(ids(&found), [("REL-BARE-EXCEPT", Severity::Medium)]);
        assert_eq!(found[0].span.start_line, 2);
    }

    #[test]
    fn empty_typed_handler() {
        let found = detect_exception_issues(&unit("try:\n    f()\nexcept ValueError:\n    ...\n"));
        assert_eq!(ids(&found), [("REL-EMPTY-EXCEPT", Severity::Medium)]);
        assert_eq!(found[0].cwe_id.as_deref(), Some("CWE-390"));
    }

    #[test]
    fn broad_exception_without_logging() {
        let src = "try:\n    f()\nexcept Exception as e:\n    result = None\n";
        assert_eq!(ids(&detect_exception_issues(&unit(src))), [("REL-BROAD-EXCEPT", Severity::Low)]);
        let logged = "try:\n    f()\nexcept Exception:\n    log.exception('f failed')\n";
        assert!(detect_exception_issues(&unit(logged)).is_empty());
    }

    #[test]
    fn reraising_handlers_are_exempt() {
        let src = "\
try:
    f()
except:
    cleanup()
    raise
try:
    g()
except Exception as e:
    raise RuntimeError('g') from e
";
        assert!(detect_exception_issues(&unit(src)).is_empty());
    }

    #[test]
    fn with_open_is_clean() {
        assert!(detect_exception_issues(&unit("with open(p) as f:\n    data = f.read()\n")).is_empty());
    }

    #[test]
    fn unclosed_open() {
        let found = detect_exception_issues(&unit("def load(p):\n    f = open(p)\n    return f.read()\n"));
        assert_eq!(ids(&found), [("REL-UNCLOSED-RESOURCE", Severity::Medium)]);
        assert_eq!(found[0].cwe_id.as_deref(), Some("CWE-772"));
    }

    #[test]
    fn closed_returned_or_managed_files_are_clean() {
        let src = "\
def a(p):
    f = open(p)
    try:
        return f.read()
    finally:
        f.close()
def b(p):
    f = open(p)
    return f
def c(p):
    f = open(p)
    with f:
        pass
class H:
    def __init__(self, p):
        fh = open(p)
        self.fh = fh
";
        assert!(detect_exception_issues(&unit(src)).is_empty());
    }

    #[test]
    fn while_true_without_exit() {
        let found = detect_infinite_loops(&unit("while True:\n    x += 1\n"));
        assert_eq!(ids(&found), [("REL-INFINITE-LOOP", Severity::High)]);
        assert_eq!(found[0].cwe_id.as_deref(), Some("CWE-835"));
    }

    #[test]
    fn while_true_with_break() {
        assert!(detect_infinite_loops(&unit("while True:\n    if done(): break\n")).is_empty());
    }

    #[test]
    fn unchanging_condition() {
        let found = detect_infinite_loops(&unit("while i < n:\n    total += i\n"));
        assert_eq!(ids(&found), [("REL-UNCHANGING-LOOP-CONDITION", Severity::Medium)]);
        assert!(found[0].message.contains("i, n"));
        assert!(detect_infinite_loops(&unit("while i < n:\n    i += 1\n")).is_empty());
    }

    #[test]
    fn loop_exits_and_opaque_conditions() {
        let src = "\
import sys
while True:
    sys.exit(0)
def gen():
    while True:
        yield 1
def serve(q):
    while True:
        for job in q:
            return job
while self.running:
    tick()
while not stop_event.is_set():
    tick()
while items:
    items.pop()
";
        assert!(detect_infinite_loops(&unit(src)).is_empty());
    }

    #[test]
    fn break_in_nested_loop_does_not_count() {
        let src = "while True:\n    for x in xs:\n        break\n";
        assert_eq!(detect_infinite_loops(&unit(src)).len(), 1);
    }

    fn body_stmt() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["x = x + 1", "total += x", "print(x)", "pass", "y = [x]"]).prop_map(String::from)
    }

    proptest! {
        #[test]
        fn any_break_suppresses_loop_findings(
            before in prop::collection::vec(body_stmt(), 0..4),
            after in prop::collection::vec(body_stmt(), 0..4),
            guard in prop::sample::select(vec!["", "if x > 3:", "try:", "with ctx:"]),
            cond in prop::sample::select(vec!["True", "1", "i < n", "flag"]),
        ) {
            let mut src = format!("while {cond}:\n");
            for s in &before { src.push_str(&format!("    {s}\n")); }
            if guard.is_empty() {
                src.push_str("    break\n");
            } else {
                src.push_str(&format!("    {guard}\n        break\n"));
                if guard == "try:" { src.push_str("    except ValueError:\n        pass\n"); }
            }
            for s in &after { src.push_str(&format!("    {s}\n")); }
            prop_assert!(detect_infinite_loops(&unit(&src)).is_empty(), "{src}");
        }

        #[test]
        fn reraise_always_exempts(
            clause in prop::sample::select(vec!["except:", "except Exception:", "except (ValueError, BaseException) as e:", "except KeyError:"]),
            filler in prop::sample::select(vec!["pass", "x = 1", "..."]),
        ) {
            let src = format!("try:\n    f()\n{clause}\n    {filler}\n    raise\n");
            prop_assert!(detect_exception_issues(&unit(&src)).is_empty());
        }
    }
}
