//! By-reference traversal over the Python syntax tree.
//!
//! The upstream visitor consumes nodes by value; analyzers here only ever
//! borrow the tree owned by a [`SourceUnit`](super::SourceUnit), so this module
//! provides a borrowing equivalent. Implementors override the hooks they care
//! about and call the matching `walk_*` function to keep descending.

use std::collections::HashSet;

use rustpython_parser::ast::{
    self, Arguments, Comprehension, ExceptHandler, Expr, ExprContext, Pattern, Stmt,
};

pub trait Visit<'a> {
    fn visit_stmt(&mut self, stmt: &'a Stmt) {
        walk_stmt(self, stmt);
    }

    fn visit_expr(&mut self, expr: &'a Expr) {
        walk_expr(self, expr);
    }

    fn visit_handler(&mut self, handler: &'a ExceptHandler) {
        walk_handler(self, handler);
    }

    fn visit_body(&mut self, body: &'a [Stmt]) {
        for stmt in body {
            self.visit_stmt(stmt);
        }
    }
}

pub fn walk_arguments<'a, V: Visit<'a> + ?Sized>(v: &mut V, args: &'a Arguments) {
    for arg in args
        .posonlyargs
        .iter()
        .chain(&args.args)
        .chain(&args.kwonlyargs)
    {
        if let Some(ann) = &arg.def.annotation {
            v.visit_expr(ann);
        }
        if let Some(default) = &arg.default {
            v.visit_expr(default);
        }
    }
    for arg in args.vararg.iter().chain(&args.kwarg) {
        if let Some(ann) = &arg.annotation {
            v.visit_expr(ann);
        }
    }
}

pub fn walk_handler<'a, V: Visit<'a> + ?Sized>(v: &mut V, handler: &'a ExceptHandler) {
    let ExceptHandler::ExceptHandler(h) = handler;
    if let Some(ty) = &h.type_ {
        v.visit_expr(ty);
    }
    v.visit_body(&h.body);
}

fn walk_pattern<'a, V: Visit<'a> + ?Sized>(v: &mut V, pattern: &'a Pattern) {
    match pattern {
        Pattern::MatchValue(p) => v.visit_expr(&p.value),
        Pattern::MatchSingleton(_) | Pattern::MatchStar(_) => {}
        Pattern::MatchSequence(p) => p.patterns.iter().for_each(|p| walk_pattern(v, p)),
        Pattern::MatchMapping(p) => {
            p.keys.iter().for_each(|k| v.visit_expr(k));
            p.patterns.iter().for_each(|p| walk_pattern(v, p));
        }
        Pattern::MatchClass(p) => {
            v.visit_expr(&p.cls);
            p.patterns
                .iter()
                .chain(&p.kwd_patterns)
                .for_each(|p| walk_pattern(v, p));
        }
        Pattern::MatchAs(p) => {
            if let Some(inner) = &p.pattern {
                walk_pattern(v, inner);
            }
        }
        Pattern::MatchOr(p) => p.patterns.iter().for_each(|p| walk_pattern(v, p)),
    }
}

pub fn walk_stmt<'a, V: Visit<'a> + ?Sized>(v: &mut V, stmt: &'a Stmt) {
    match stmt {
        Stmt::FunctionDef(s) => {
            s.decorator_list.iter().for_each(|d| v.visit_expr(d));
            walk_arguments(v, &s.args);
            if let Some(r) = &s.returns {
                v.visit_expr(r);
            }
            v.visit_body(&s.body);
        }
        Stmt::AsyncFunctionDef(s) => {
            s.decorator_list.iter().for_each(|d| v.visit_expr(d));
            walk_arguments(v, &s.args);
            if let Some(r) = &s.returns {
                v.visit_expr(r);
            }
            v.visit_body(&s.body);
        }
        Stmt::ClassDef(s) => {
            s.decorator_list.iter().for_each(|d| v.visit_expr(d));
            s.bases.iter().for_each(|b| v.visit_expr(b));
            s.keywords.iter().for_each(|k| v.visit_expr(&k.value));
            v.visit_body(&s.body);
        }
        Stmt::Return(s) => {
            if let Some(value) = &s.value {
                v.visit_expr(value);
            }
        }
        Stmt::Delete(s) => s.targets.iter().for_each(|t| v.visit_expr(t)),
        Stmt::Assign(s) => {
            s.targets.iter().for_each(|t| v.visit_expr(t));
            v.visit_expr(&s.value);
        }
        Stmt::TypeAlias(s) => {
            v.visit_expr(&s.name);
            v.visit_expr(&s.value);
        }
        Stmt::AugAssign(s) => {
            v.visit_expr(&s.target);
            v.visit_expr(&s.value);
        }
        Stmt::AnnAssign(s) => {
            v.visit_expr(&s.target);
            v.visit_expr(&s.annotation);
            if let Some(value) = &s.value {
                v.visit_expr(value);
            }
        }
        Stmt::For(s) => {
            v.visit_expr(&s.target);
            v.visit_expr(&s.iter);
            v.visit_body(&s.body);
            v.visit_body(&s.orelse);
        }
        Stmt::AsyncFor(s) => {
            v.visit_expr(&s.target);
            v.visit_expr(&s.iter);
            v.visit_body(&s.body);
            v.visit_body(&s.orelse);
        }
        Stmt::While(s) => {
            v.visit_expr(&s.test);
            v.visit_body(&s.body);
            v.visit_body(&s.orelse);
        }
        Stmt::If(s) => {
            v.visit_expr(&s.test);
            v.visit_body(&s.body);
            v.visit_body(&s.orelse);
        }
        Stmt::With(s) => {
            for item in &s.items {
                v.visit_expr(&item.context_expr);
                if let Some(vars) = &item.optional_vars {
                    v.visit_expr(vars);
                }
            }
            v.visit_body(&s.body);
        }
        Stmt::AsyncWith(s) => {
            for item in &s.items {
                v.visit_expr(&item.context_expr);
                if let Some(vars) = &item.optional_vars {
                    v.visit_expr(vars);
                }
            }
            v.visit_body(&s.body);
        }
        Stmt::Match(s) => {
            v.visit_expr(&s.subject);
            for case in &s.cases {
                walk_pattern(v, &case.pattern);
                if let Some(guard) = &case.guard {
                    v.visit_expr(guard);
                }
                v.visit_body(&case.body);
            }
        }
        Stmt::Raise(s) => {
            if let Some(exc) = &s.exc {
                v.visit_expr(exc);
            }
            if let Some(cause) = &s.cause {
                v.visit_expr(cause);
            }
        }
        Stmt::Try(s) => {
            v.visit_body(&s.body);
            s.handlers.iter().for_each(|h| v.visit_handler(h));
            v.visit_body(&s.orelse);
            v.visit_body(&s.finalbody);
        }
        Stmt::TryStar(s) => {
            v.visit_body(&s.body);
            s.handlers.iter().for_each(|h| v.visit_handler(h));
            v.visit_body(&s.orelse);
            v.visit_body(&s.finalbody);
        }
        Stmt::Assert(s) => {
            v.visit_expr(&s.test);
            if let Some(msg) = &s.msg {
                v.visit_expr(msg);
            }
        }
        Stmt::Expr(s) => v.visit_expr(&s.value),
        Stmt::Import(_)
        | Stmt::ImportFrom(_)
        | Stmt::Global(_)
        | Stmt::Nonlocal(_)
        | Stmt::Pass(_)
        | Stmt::Break(_)
        | Stmt::Continue(_) => {}
    }
}

fn walk_generators<'a, V: Visit<'a> + ?Sized>(v: &mut V, generators: &'a [Comprehension]) {
    for generator in generators {
        v.visit_expr(&generator.target);
        v.visit_expr(&generator.iter);
        generator.ifs.iter().for_each(|cond| v.visit_expr(cond));
    }
}

pub fn walk_expr<'a, V: Visit<'a> + ?Sized>(v: &mut V, expr: &'a Expr) {
    match expr {
        Expr::BoolOp(e) => e.values.iter().for_each(|x| v.visit_expr(x)),
        Expr::NamedExpr(e) => {
            v.visit_expr(&e.target);
            v.visit_expr(&e.value);
        }
        Expr::BinOp(e) => {
            v.visit_expr(&e.left);
            v.visit_expr(&e.right);
        }
        Expr::UnaryOp(e) => v.visit_expr(&e.operand),
        Expr::Lambda(e) => {
            walk_arguments(v, &e.args);
            v.visit_expr(&e.body);
        }
        Expr::IfExp(e) => {
            v.visit_expr(&e.test);
            v.visit_expr(&e.body);
            v.visit_expr(&e.orelse);
        }
        Expr::Dict(e) => {
            e.keys.iter().flatten().for_each(|k| v.visit_expr(k));
            e.values.iter().for_each(|x| v.visit_expr(x));
        }
        Expr::Set(e) => e.elts.iter().for_each(|x| v.visit_expr(x)),
        Expr::ListComp(e) => {
            walk_generators(v, &e.generators);
            v.visit_expr(&e.elt);
        }
        Expr::SetComp(e) => {
            walk_generators(v, &e.generators);
            v.visit_expr(&e.elt);
        }
        Expr::DictComp(e) => {
            walk_generators(v, &e.generators);
            v.visit_expr(&e.key);
            v.visit_expr(&e.value);
        }
        Expr::GeneratorExp(e) => {
            walk_generators(v, &e.generators);
            v.visit_expr(&e.elt);
        }
        Expr::Await(e) => v.visit_expr(&e.value),
        Expr::Yield(e) => {
            if let Some(value) = &e.value {
                v.visit_expr(value);
            }
        }
        Expr::YieldFrom(e) => v.visit_expr(&e.value),
        Expr::Compare(e) => {
            v.visit_expr(&e.left);
            e.comparators.iter().for_each(|x| v.visit_expr(x));
        }
        Expr::Call(e) => {
            v.visit_expr(&e.func);
            e.args.iter().for_each(|x| v.visit_expr(x));
            e.keywords.iter().for_each(|k| v.visit_expr(&k.value));
        }
        Expr::FormattedValue(e) => {
            v.visit_expr(&e.value);
            if let Some(spec) = &e.format_spec {
                v.visit_expr(spec);
            }
        }
        Expr::JoinedStr(e) => e.values.iter().for_each(|x| v.visit_expr(x)),
        Expr::Constant(_) | Expr::Name(_) => {}
        Expr::Attribute(e) => v.visit_expr(&e.value),
        Expr::Subscript(e) => {
            v.visit_expr(&e.value);
            v.visit_expr(&e.slice);
        }
        Expr::Starred(e) => v.visit_expr(&e.value),
        Expr::List(e) => e.elts.iter().for_each(|x| v.visit_expr(x)),
        Expr::Tuple(e) => e.elts.iter().for_each(|x| v.visit_expr(x)),
        Expr::Slice(e) => {
            for part in [&e.lower, &e.upper, &e.step].into_iter().flatten() {
                v.visit_expr(part);
            }
        }
    }
}

/// True for statements that open a new name scope.
pub fn is_scope(stmt: &Stmt) -> bool {
    matches!(
        stmt,
        Stmt::FunctionDef(_) | Stmt::AsyncFunctionDef(_) | Stmt::ClassDef(_)
    )
}

/// True for `for`, `async for` and `while`.
pub fn is_loop(stmt: &Stmt) -> bool {
    matches!(stmt, Stmt::For(_) | Stmt::AsyncFor(_) | Stmt::While(_))
}

/// Body and else-branch of a loop statement.
pub fn loop_parts(stmt: &Stmt) -> Option<(&[Stmt], &[Stmt])> {
    match stmt {
        Stmt::For(s) => Some((&s.body, &s.orelse)),
        Stmt::AsyncFor(s) => Some((&s.body, &s.orelse)),
        Stmt::While(s) => Some((&s.body, &s.orelse)),
        _ => None,
    }
}

/// Normalized view over `def` and `async def`.
#[derive(Clone, Copy)]
pub struct FnParts<'a> {
    pub name: &'a str,
    pub args: &'a Arguments,
    pub body: &'a [Stmt],
    pub returns: Option<&'a Expr>,
    pub decorators: &'a [Expr],
    pub is_async: bool,
}

pub fn function_parts(stmt: &Stmt) -> Option<FnParts<'_>> {
    match stmt {
        Stmt::FunctionDef(s) => Some(FnParts {
            name: s.name.as_str(),
            args: &s.args,
            body: &s.body,
            returns: s.returns.as_deref(),
            decorators: &s.decorator_list,
            is_async: false,
        }),
        Stmt::AsyncFunctionDef(s) => Some(FnParts {
            name: s.name.as_str(),
            args: &s.args,
            body: &s.body,
            returns: s.returns.as_deref(),
            decorators: &s.decorator_list,
            is_async: true,
        }),
        _ => None,
    }
}

/// Statements directly owned by a compound statement, without entering
/// nested scopes. Handlers are flattened in source order.
pub fn child_blocks(stmt: &Stmt) -> Vec<&[Stmt]> {
    match stmt {
        Stmt::For(s) => vec![&s.body, &s.orelse],
        Stmt::AsyncFor(s) => vec![&s.body, &s.orelse],
        Stmt::While(s) => vec![&s.body, &s.orelse],
        Stmt::If(s) => vec![&s.body, &s.orelse],
        Stmt::With(s) => vec![&s.body],
        Stmt::AsyncWith(s) => vec![&s.body],
        Stmt::Match(s) => s.cases.iter().map(|c| c.body.as_slice()).collect(),
        Stmt::Try(s) => try_blocks(&s.body, &s.handlers, &s.orelse, &s.finalbody),
        Stmt::TryStar(s) => try_blocks(&s.body, &s.handlers, &s.orelse, &s.finalbody),
        _ => Vec::new(),
    }
}

fn try_blocks<'a>(
    body: &'a [Stmt],
    handlers: &'a [ExceptHandler],
    orelse: &'a [Stmt],
    finalbody: &'a [Stmt],
) -> Vec<&'a [Stmt]> {
    let mut out = vec![body];
    for ExceptHandler::ExceptHandler(h) in handlers {
        out.push(&h.body);
    }
    out.push(orelse);
    out.push(finalbody);
    out
}

/// Shared view over `try` and `try*`.
pub struct TryParts<'a> {
    pub body: &'a [Stmt],
    pub handlers: Vec<&'a ast::ExceptHandlerExceptHandler>,
    pub orelse: &'a [Stmt],
    pub finalbody: &'a [Stmt],
}

pub fn try_parts(stmt: &Stmt) -> Option<TryParts<'_>> {
    let (body, handlers, orelse, finalbody) = match stmt {
        Stmt::Try(s) => (&s.body, &s.handlers, &s.orelse, &s.finalbody),
        Stmt::TryStar(s) => (&s.body, &s.handlers, &s.orelse, &s.finalbody),
        _ => return None,
    };
    Some(TryParts {
        body,
        handlers: handlers
            .iter()
            .map(|ExceptHandler::ExceptHandler(h)| h)
            .collect(),
        orelse,
        finalbody,
    })
}

/// Visit every statement in `body` (recursively through compound statements)
/// without entering nested function or class bodies. The scope-opening
/// statement itself is still reported.
pub fn for_each_stmt_in_scope<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for stmt in body {
        f(stmt);
        if !is_scope(stmt) {
            for block in child_blocks(stmt) {
                for_each_stmt_in_scope(block, f);
            }
        }
    }
}

/// Every statement in `body`, nested function and class bodies included.
pub fn for_each_stmt<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for_each_stmt_in_scope(body, &mut |stmt| {
        f(stmt);
        if let Some(parts) = function_parts(stmt) {
            for_each_stmt(parts.body, f);
        } else if let Stmt::ClassDef(c) = stmt {
            for_each_stmt(&c.body, f);
        }
    });
}

/// Root name of an attribute/subscript chain (`a` for `a.b[0].c`).
pub fn root_name(expr: &Expr) -> Option<&str> {
    match expr {
        Expr::Name(n) => Some(n.id.as_str()),
        Expr::Attribute(a) => root_name(&a.value),
        Expr::Subscript(s) => root_name(&s.value),
        Expr::Call(c) => root_name(&c.func),
        _ => None,
    }
}

/// Names that `body` may rebind or mutate: stores, `del`, augmented
/// assignment, attribute or item stores through the name, and method calls
/// on it. Nested scopes are not entered.
pub fn mutated_names(body: &[Stmt]) -> HashSet<&str> {
    let mut out = HashSet::new();
    for_each_expr_in_scope(body, &mut |e| match e {
        Expr::Name(n) if !matches!(n.ctx, ExprContext::Load) => {
            out.insert(n.id.as_str());
        }
        Expr::Attribute(ast::ExprAttribute { value, ctx, .. }) | Expr::Subscript(ast::ExprSubscript { value, ctx, .. })
            if !matches!(ctx, ExprContext::Load) =>
        {
            out.extend(root_name(value));
        }
        Expr::Call(c) => {
            if let Expr::Attribute(a) = &*c.func {
                out.extend(root_name(&a.value));
            }
        }
        _ => {}
    });
    out
}

struct ExprCollector<'a, 'f> {
    f: &'f mut dyn FnMut(&'a Expr),
    enter_scopes: bool,
}

impl<'a> Visit<'a> for ExprCollector<'a, '_> {
    fn visit_stmt(&mut self, stmt: &'a Stmt) {
        if !self.enter_scopes && is_scope(stmt) {
            return;
        }
        walk_stmt(self, stmt);
    }

    fn visit_expr(&mut self, expr: &'a Expr) {
        (self.f)(expr);
        walk_expr(self, expr);
    }
}

/// Every expression reachable from `body`, including nested scopes.
pub fn for_each_expr<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Expr)) {
    ExprCollector { f, enter_scopes: true }.visit_body(body);
}

/// Every expression in `body` that belongs to the same scope.
pub fn for_each_expr_in_scope<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Expr)) {
    ExprCollector { f, enter_scopes: false }.visit_body(body);
}

/// Every expression inside one statement (nested scopes excluded).
pub fn for_each_expr_in_stmt<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(&'a Expr)) {
    ExprCollector { f, enter_scopes: false }.visit_body(std::slice::from_ref(stmt));
}

/// Every sub-expression of `expr`, `expr` included.
pub fn for_each_subexpr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    let mut collector = ExprCollector { f, enter_scopes: false };
    collector.visit_expr(expr);
}
