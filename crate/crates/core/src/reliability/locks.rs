use std::collections::{BTreeMap, BTreeSet, HashSet};

use rustpython_parser::ast::{self, Expr, Stmt};

use crate::findings::{rules, Finding};
use crate::pysource::walk::{self, for_each_expr, for_each_stmt, for_each_subexpr};
use crate::pysource::{constant_truth, dotted_name, FunctionInfo, SourceUnit, Span};

const LOCK_MODULES: &[&str] = &["threading", "multiprocessing", "asyncio"];
const LOCK_TYPES: &[&str] = &["Lock", "RLock", "Semaphore", "BoundedSemaphore", "Condition"];

/// Dotted names that denote locks: targets of lock constructors and any
/// receiver of `.acquire()`.
fn lock_names(unit: &SourceUnit) -> HashSet<String> {
    let mut out = HashSet::new();
    for_each_stmt(&unit.syntax_root, &mut |stmt| {
        let (targets, value): (Vec<&Expr>, &Expr) = match stmt {
            Stmt::Assign(a) => (a.targets.iter().collect(), &a.value),
            Stmt::AnnAssign(ast::StmtAnnAssign { target, value: Some(v), .. }) => (vec![target], v),
            _ => return,
        };
        let is_lock = unit.bindings.callee(value).is_some_and(|c| {
            c.rsplit_once('.').is_some_and(|(m, t)| {
                LOCK_MODULES.contains(&m.split('.').next().unwrap_or(m)) && LOCK_TYPES.contains(&t)
            })
        });
        if is_lock {
            out.extend(targets.into_iter().filter_map(dotted_name));
        }
    });
    for_each_expr(&unit.syntax_root, &mut |e| {
        if let Some((receiver, "acquire")) = lock_method(e) {
            out.insert(receiver);
        }
    });
    out
}

/// `x.acquire()` / `x.release()` calls: the receiver and the method.
fn lock_method(e: &Expr) -> Option<(String, &str)> {
    let Expr::Call(c) = e else { return None };
    let Expr::Attribute(a) = &*c.func else { return None };
    let method = a.attr.as_str();
    if method != "acquire" && method != "release" {
        return None;
    }
    Some((dotted_name(&a.value)?, method))
}

fn with_locks<'a>(items: &'a [ast::WithItem], locks: &HashSet<String>) -> Vec<(String, &'a Expr)> {
    items
        .iter()
        .filter_map(|i| dotted_name(&i.context_expr).filter(|n| locks.contains(n)).map(|n| (n, &i.context_expr)))
        .collect()
}

// ---------------------------------------------------------------------------
// Ordering

/// (held, then-acquired) pairs in textual order, with the inner site.
fn acquisition_pairs(unit: &SourceUnit, body: &[Stmt], locks: &HashSet<String>) -> Vec<(String, String, Span)> {
    fn visit(
        unit: &SourceUnit,
        body: &[Stmt],
        locks: &HashSet<String>,
        held: &mut Vec<String>,
        out: &mut Vec<(String, String, Span)>,
    ) {
        for stmt in body {
            if walk::is_scope(stmt) {
                continue;
            }
            let items = match stmt {
                Stmt::With(w) => Some(&w.items),
                Stmt::AsyncWith(w) => Some(&w.items),
                _ => None,
            };
            if let Some(items) = items {
                let taken = with_locks(items, locks);
                for (name, site) in &taken {
                    for h in held.iter().filter(|h| *h != name) {
                        out.push((h.clone(), name.clone(), unit.span(*site)));
                    }
                    held.push(name.clone());
                }
                visit(unit, walk::child_blocks(stmt)[0], locks, held, out);
                held.truncate(held.len() - taken.len());
                continue;
            }
            if let Stmt::Expr(e) = stmt {
                match lock_method(&e.value) {
                    Some((name, "acquire")) if locks.contains(&name) => {
                        for h in held.iter().filter(|h| **h != name) {
                            out.push((h.clone(), name.clone(), unit.span(stmt)));
                        }
                        held.push(name);
                    }
                    Some((name, "release")) => {
                        if let Some(pos) = held.iter().rposition(|h| *h == name) {
                            held.remove(pos);
                        }
                    }
                    _ => {}
                }
                continue;
            }
            for block in walk::child_blocks(stmt) {
                visit(unit, block, locks, held, out);
            }
        }
    }
    let mut out = Vec::new();
    visit(unit, body, locks, &mut Vec::new(), &mut out);
    out
}

fn ordering_findings(unit: &SourceUnit, locks: &HashSet<String>) -> Vec<Finding> {
    // pair -> (function index, site) of its first occurrence per function
    let mut seen: BTreeMap<(String, String), Vec<(usize, Span)>> = BTreeMap::new();
    for (i, f) in unit.function_index.iter().enumerate() {
        let mut local = HashSet::new();
        for (a, b, site) in acquisition_pairs(unit, f.body(), locks) {
            if local.insert((a.clone(), b.clone())) {
                seen.entry((a, b)).or_default().push((i, site));
            }
        }
    }
    let mut out = Vec::new();
    for ((a, b), forward) in &seen {
        if a > b {
            continue;
        }
        let Some(backward) = seen.get(&(b.clone(), a.clone())) else { continue };
        let conflict = forward
            .iter()
            .flat_map(|f| backward.iter().map(move |g| (f, g)))
            .filter(|(f, g)| f.0 != g.0)
            .map(|(f, g)| if f.1 >= g.1 { f } else { g })
            .min_by(|x, y| x.1.cmp(&y.1));
        if let Some((func, site)) = conflict {
            let f: &FunctionInfo = &unit.function_index[*func];
            out.push(Finding::new(
                rules::REL_LOCK_ORDER,
                site.clone(),
                format!("`{a}` and `{b}` are acquired in opposite orders (here in `{}`)", f.qualified_name),
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Release on every path

type Held = BTreeSet<String>;
type States = BTreeSet<Held>;

enum Frame<'a> {
    /// Inside a `try` body; exceptions go to handlers when there are any.
    TryBody { has_handlers: bool, finalbody: &'a [Stmt] },
    /// Inside handlers or `else` of a `try` with a `finally`.
    Protected { finalbody: &'a [Stmt] },
}

struct ReleaseCheck<'a, 'u> {
    unit: &'u SourceUnit,
    locks: &'u HashSet<String>,
    frames: Vec<Frame<'a>>,
    /// Locks that leak on some path.
    leaked: BTreeSet<String>,
    /// First explicit acquire of each lock.
    first_acquire: BTreeMap<String, Span>,
    /// Exception states collected for the innermost enclosing `try` body.
    exception_states: Vec<States>,
}

fn map_states(states: &States, f: impl Fn(&mut Held)) -> States {
    states
        .iter()
        .map(|s| {
            let mut s = s.clone();
            f(&mut s);
            s
        })
        .collect()
}

impl<'a> ReleaseCheck<'a, '_> {
    fn acquire_target(&self, e: &Expr) -> Option<String> {
        let mut found = None;
        for_each_subexpr(e, &mut |sub| {
            if let Some((name, "acquire")) = lock_method(sub) {
                if self.locks.contains(&name) {
                    found.get_or_insert(name);
                }
            }
        });
        found
    }

    /// Run `finally` blocks of the frames an exit passes through, innermost
    /// first, stopping at a `try` whose handlers catch (`stop_at_handlers`).
    fn unwind(&mut self, states: States, stop_at_handlers: bool) -> Option<States> {
        let mut states = states;
        let frames: Vec<(bool, &'a [Stmt])> = self
            .frames
            .iter()
            .rev()
            .map(|f| match f {
                Frame::TryBody { has_handlers, finalbody } => (*has_handlers, *finalbody),
                Frame::Protected { finalbody } => (false, *finalbody),
            })
            .collect();
        for (has_handlers, finalbody) in frames {
            if stop_at_handlers && has_handlers {
                return None;
            }
            if !finalbody.is_empty() {
                // The finally body runs outside the frame it protects.
                let saved = std::mem::take(&mut self.frames);
                states = self.block(finalbody, states);
                self.frames = saved;
            }
        }
        Some(states)
    }

    fn exit(&mut self, states: States, is_raise: bool) {
        if let Some(states) = self.unwind(states, is_raise) {
            for held in states {
                self.leaked.extend(held);
            }
        }
    }

    fn block(&mut self, body: &'a [Stmt], mut states: States) -> States {
        for stmt in body {
            if states.is_empty() {
                break;
            }
            states = self.stmt(stmt, states);
            if let Some(exc) = self.exception_states.last_mut() {
                exc.extend(states.iter().cloned());
            }
        }
        states
    }

    fn stmt(&mut self, stmt: &'a Stmt, states: States) -> States {
        if walk::is_scope(stmt) {
            return states;
        }
        match stmt {
            Stmt::Expr(e) => match lock_method(&e.value) {
                Some((name, "acquire")) if self.locks.contains(&name) => {
                    self.first_acquire.entry(name.clone()).or_insert_with(|| self.unit.span(stmt));
                    map_states(&states, |h| {
                        h.insert(name.clone());
                    })
                }
                Some((name, "release")) => map_states(&states, |h| {
                    h.remove(&name);
                }),
                _ => states,
            },
            Stmt::Return(_) => {
                self.exit(states, false);
                States::new()
            }
            Stmt::Raise(_) => {
                self.exit(states, true);
                States::new()
            }
            Stmt::If(s) => {
                let (then_in, else_in) = match self.acquire_target(&s.test) {
                    Some(name) => {
                        self.first_acquire.entry(name.clone()).or_insert_with(|| self.unit.span(&*s.test));
                        (map_states(&states, |h| { h.insert(name.clone()); }), states.clone())
                    }
                    None => (states.clone(), states.clone()),
                };
                let mut out = self.block(&s.body, then_in);
                out.extend(self.block(&s.orelse, else_in));
                out
            }
            Stmt::While(_) | Stmt::For(_) | Stmt::AsyncFor(_) => {
                let (body, orelse) = walk::loop_parts(stmt).expect("loop");
                let infinite = matches!(stmt, Stmt::While(w) if constant_truth(&w.test) == Some(true));
                // Zero or more iterations, to a fixpoint.
                let mut reached = states.clone();
                loop {
                    let next = self.block(body, reached.clone());
                    let before = reached.len();
                    reached.extend(next);
                    if reached.len() == before {
                        break;
                    }
                }
                if infinite {
                    // Only `break` leaves; break is modelled as fall-through.
                    return reached;
                }
                self.block(orelse, reached)
            }
            Stmt::Try(_) | Stmt::TryStar(_) => {
                let t = walk::try_parts(stmt).expect("try");
                self.frames.push(Frame::TryBody { has_handlers: !t.handlers.is_empty(), finalbody: t.finalbody });
                self.exception_states.push(states.clone());
                let body_out = self.block(t.body, states);
                let exc = self.exception_states.pop().unwrap_or_default();
                self.frames.pop();

                self.frames.push(Frame::Protected { finalbody: t.finalbody });
                let mut normal = self.block(t.orelse, body_out);
                for h in &t.handlers {
                    normal.extend(self.block(&h.body, exc.clone()));
                }
                self.frames.pop();
                if t.finalbody.is_empty() {
                    normal
                } else {
                    self.block(t.finalbody, normal)
                }
            }
            Stmt::Match(m) => {
                let mut out = states.clone();
                for case in &m.cases {
                    out.extend(self.block(&case.body, states.clone()));
                }
                out
            }
            other => {
                let mut current = states;
                for block in walk::child_blocks(other) {
                    current = self.block(block, current);
                }
                current
            }
        }
    }
}

fn release_findings(unit: &SourceUnit, locks: &HashSet<String>) -> Vec<Finding> {
    let mut out = Vec::new();
    for f in &unit.function_index {
        let mut check = ReleaseCheck {
            unit,
            locks,
            frames: Vec::new(),
            leaked: BTreeSet::new(),
            first_acquire: BTreeMap::new(),
            exception_states: Vec::new(),
        };
        let start: States = [Held::new()].into();
        let end = check.block(f.body(), start);
        check.exit(end, false);
        for lock in &check.leaked {
            if let Some(site) = check.first_acquire.get(lock) {
                out.push(Finding::new(
                    rules::REL_LOCK_NOT_RELEASED,
                    site.clone(),
                    format!("`{lock}` acquired in `{}` is not released on every path", f.qualified_name),
                ));
            }
        }
    }
    out
}

pub fn detect_concurrency_issues(unit: &SourceUnit) -> Vec<Finding> {
    let locks = lock_names(unit);
    if locks.is_empty() {
        return Vec::new();
    }
    let mut out = ordering_findings(unit, &locks);
    out.extend(release_findings(unit, &locks));
    out
}
