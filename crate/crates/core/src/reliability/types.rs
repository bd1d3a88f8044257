use std::collections::{BTreeMap, HashMap};

use rustpython_parser::ast::{self, Constant, Expr, Stmt, UnaryOp};

use crate::findings::{rules, Finding};
use crate::pysource::walk::{for_each_expr, for_each_stmt_in_scope, function_parts};
use crate::pysource::{FunctionInfo, SourceUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    Int,
    Float,
    Str,
    Bool,
    Bytes,
}

impl Scalar {
    fn from_annotation(e: &Expr) -> Option<Self> {
        let Expr::Name(n) = e else { return None };
        Some(match n.id.as_str() {
            "int" => Scalar::Int,
            "float" => Scalar::Float,
            "str" => Scalar::Str,
            "bool" => Scalar::Bool,
            "bytes" => Scalar::Bytes,
            _ => return None,
        })
    }

    fn of_literal(e: &Expr) -> Option<Self> {
        match e {
            Expr::Constant(c) => Some(match c.value {
                Constant::Int(_) => Scalar::Int,
                Constant::Float(_) => Scalar::Float,
                Constant::Str(_) => Scalar::Str,
                Constant::Bool(_) => Scalar::Bool,
                Constant::Bytes(_) => Scalar::Bytes,
                _ => return None,
            }),
            Expr::JoinedStr(_) => Some(Scalar::Str),
            Expr::UnaryOp(u) if matches!(u.op, UnaryOp::USub | UnaryOp::UAdd) => match Scalar::of_literal(&u.operand)? {
                s @ (Scalar::Int | Scalar::Float) => Some(s),
                _ => None,
            },
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Scalar::Int => "int",
            Scalar::Float => "float",
            Scalar::Str => "str",
            Scalar::Bool => "bool",
            Scalar::Bytes => "bytes",
        }
    }

    /// Numeric promotion: bool <: int <: float.
    fn accepts(self, value: Scalar) -> bool {
        self == value
            || matches!((self, value), (Scalar::Float, Scalar::Int | Scalar::Bool) | (Scalar::Int, Scalar::Bool))
    }
}

fn is_public_path(qualified: &str) -> bool {
    qualified.split('.').all(|part| {
        let dunder = part.len() > 4 && part.starts_with("__") && part.ends_with("__");
        dunder || !part.starts_with('_')
    })
}

fn missing_annotations(unit: &SourceUnit, f: &FunctionInfo) -> Option<Finding> {
    if f.is_nested || !is_public_path(&f.qualified_name) {
        return None;
    }
    let args = f.parts().args;
    let receiver = f.receiver_name();
    let mut missing: Vec<String> = args
        .posonlyargs
        .iter()
        .chain(&args.args)
        .chain(&args.kwonlyargs)
        .map(|a| &a.def)
        .chain(args.vararg.as_deref())
        .chain(args.kwarg.as_deref())
        .filter(|a| a.annotation.is_none() && Some(a.arg.as_str()) != receiver)
        .map(|a| a.arg.to_string())
        .collect();
    let needs_return = !f.has_return_annotation && f.name != "__init__";
    if missing.is_empty() && !needs_return {
        return None;
    }
    let mut what = Vec::new();
    if !missing.is_empty() {
        let plural = if missing.len() == 1 { "" } else { "s" };
        what.push(format!("parameter{plural} {}", std::mem::take(&mut missing).join(", ")));
    }
    if needs_return {
        what.push("return type".to_string());
    }
    Some(Finding::new(
        rules::REL_MISSING_ANNOTATION,
        unit.header_span(&f.span),
        format!("`{}` lacks annotations for {}", f.qualified_name, what.join(" and ")),
    ))
}

fn mismatch(unit: &SourceUnit, node: &Expr, name: &str, declared: Scalar, value: Scalar) -> Finding {
    Finding::new(
        rules::REL_TYPE_MISMATCH,
        unit.span(node),
        format!("`{name}` is declared {} but given a {} literal", declared.name(), value.name()),
    )
}

fn scalar_mismatches(unit: &SourceUnit, scope: &[Stmt], declared: &mut HashMap<String, Scalar>, out: &mut Vec<Finding>) {
    for_each_stmt_in_scope(scope, &mut |stmt| match stmt {
        Stmt::AnnAssign(a) => {
            let Expr::Name(n) = &*a.target else { return };
            let Some(ty) = Scalar::from_annotation(&a.annotation) else {
                declared.remove(n.id.as_str());
                return;
            };
            declared.insert(n.id.to_string(), ty);
            if let Some(value) = a.value.as_deref() {
                if let Some(lit) = Scalar::of_literal(value).filter(|l| !ty.accepts(*l)) {
                    out.push(mismatch(unit, value, &n.id, ty, lit));
                }
            }
        }
        Stmt::Assign(a) => {
            for t in &a.targets {
                let Expr::Name(n) = t else { continue };
                let Some(&ty) = declared.get(n.id.as_str()) else { continue };
                if let Some(lit) = Scalar::of_literal(&a.value).filter(|l| !ty.accepts(*l)) {
                    out.push(mismatch(unit, &a.value, &n.id, ty, lit));
                }
            }
        }
        _ => {}
    });
}

/// Signature of a module-level function, for local arity checks.
struct Signature<'a> {
    positional: Vec<(&'a str, bool)>,
    posonly: usize,
    keyword_only: Vec<(&'a str, bool)>,
    varargs: bool,
    varkw: bool,
}

impl<'a> Signature<'a> {
    fn of(args: &'a ast::Arguments) -> Self {
        let entry = |a: &'a ast::ArgWithDefault| (a.def.arg.as_str(), a.default.is_some());
        Self {
            positional: args.posonlyargs.iter().chain(&args.args).map(entry).collect(),
            posonly: args.posonlyargs.len(),
            keyword_only: args.kwonlyargs.iter().map(entry).collect(),
            varargs: args.vararg.is_some(),
            varkw: args.kwarg.is_some(),
        }
    }

    /// Why the call cannot bind, if it cannot.
    fn check(&self, call: &ast::ExprCall) -> Option<String> {
        let given = call.args.len();
        if given > self.positional.len() && !self.varargs {
            return Some(format!("takes {} positional arguments but {given} were given", self.positional.len()));
        }
        let mut bound: Vec<bool> = (0..self.positional.len()).map(|i| i < given).collect();
        let mut kw_bound = vec![false; self.keyword_only.len()];
        for kw in &call.keywords {
            let name = kw.arg.as_ref().map(|a| a.as_str()).unwrap_or_default();
            if let Some(i) = self.positional.iter().skip(self.posonly).position(|(p, _)| *p == name) {
                let i = i + self.posonly;
                if bound[i] {
                    return Some(format!("got multiple values for argument `{name}`"));
                }
                bound[i] = true;
            } else if let Some(i) = self.keyword_only.iter().position(|(p, _)| *p == name) {
                kw_bound[i] = true;
            } else if !self.varkw {
                return Some(format!("got an unexpected keyword argument `{name}`"));
            }
        }
        let missing: Vec<&str> = self
            .positional
            .iter()
            .zip(&bound)
            .chain(self.keyword_only.iter().zip(&kw_bound))
            .filter(|((_, has_default), b)| !**b && !has_default)
            .map(|((name, _), _)| *name)
            .collect();
        (!missing.is_empty()).then(|| format!("missing required argument(s) {}", missing.join(", ")))
    }
}

fn arity_mismatches(unit: &SourceUnit, out: &mut Vec<Finding>) {
    // Module-level names bound exactly once, by an undecorated def.
    let mut bindings: BTreeMap<&str, usize> = BTreeMap::new();
    let mut defs: BTreeMap<&str, &ast::Arguments> = BTreeMap::new();
    for_each_stmt_in_scope(&unit.syntax_root, &mut |stmt| {
        if let Some(parts) = function_parts(stmt) {
            *bindings.entry(parts.name).or_default() += 1;
            if parts.decorators.is_empty() {
                defs.insert(parts.name, parts.args);
            }
            return;
        }
        let targets: Vec<&Expr> = match stmt {
            Stmt::Assign(a) => a.targets.iter().collect(),
            Stmt::AnnAssign(a) => vec![&a.target],
            Stmt::ClassDef(_) | Stmt::Import(_) | Stmt::ImportFrom(_) => {
                // Shadowing by class or import: counted as another binding.
                let names: Vec<&str> = match stmt {
                    Stmt::ClassDef(c) => vec![c.name.as_str()],
                    Stmt::Import(i) => i.names.iter().map(|a| a.asname.as_ref().unwrap_or(&a.name).as_str()).collect(),
                    Stmt::ImportFrom(i) => i.names.iter().map(|a| a.asname.as_ref().unwrap_or(&a.name).as_str()).collect(),
                    _ => unreachable!(),
                };
                for n in names {
                    *bindings.entry(n).or_default() += 1;
                }
                return;
            }
            _ => return,
        };
        for t in targets {
            if let Expr::Name(n) = t {
                *bindings.entry(n.id.as_str()).or_default() += 1;
            }
        }
    });
    let signatures: HashMap<&str, Signature> = defs
        .into_iter()
        .filter(|(name, _)| bindings.get(name) == Some(&1))
        .map(|(name, args)| (name, Signature::of(args)))
        .collect();
    if signatures.is_empty() {
        return;
    }
    for_each_expr(&unit.syntax_root, &mut |e| {
        let Expr::Call(call) = e else { return };
        let Expr::Name(callee) = &*call.func else { return };
        let Some(sig) = signatures.get(callee.id.as_str()) else { return };
        let unpacked = call.args.iter().any(|a| matches!(a, Expr::Starred(_))) || call.keywords.iter().any(|k| k.arg.is_none());
        if unpacked {
            return;
        }
        if let Some(reason) = sig.check(call) {
            out.push(Finding::new(
                rules::REL_ARITY_MISMATCH,
                unit.span(call),
                format!("call to `{}` {reason}", callee.id),
            ));
        }
    });
}

pub fn detect_type_safety_issues(unit: &SourceUnit) -> Vec<Finding> {
    let mut out: Vec<Finding> = unit.function_index.iter().filter_map(|f| missing_annotations(unit, f)).collect();

    scalar_mismatches(unit, &unit.syntax_root, &mut HashMap::new(), &mut out);
    for c in &unit.class_index {
        scalar_mismatches(unit, c.body(), &mut HashMap::new(), &mut out);
    }
    for f in &unit.function_index {
        let parts = f.parts();
        let mut declared = HashMap::new();
        let args = parts.args;
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            let Some(ty) = a.def.annotation.as_deref().and_then(Scalar::from_annotation) else { continue };
            declared.insert(a.def.arg.to_string(), ty);
            if let Some(default) = a.default.as_deref() {
                if let Some(lit) = Scalar::of_literal(default).filter(|l| !ty.accepts(*l)) {
                    out.push(mismatch(unit, default, &a.def.arg, ty, lit));
                }
            }
        }
        scalar_mismatches(unit, parts.body, &mut declared, &mut out);
        if let Some(ret) = parts.returns.and_then(Scalar::from_annotation) {
            for_each_stmt_in_scope(parts.body, &mut |s| {
                if let Stmt::Return(ast::StmtReturn { value: Some(v), .. }) = s {
                    if let Some(lit) = Scalar::of_literal(v).filter(|l| !ret.accepts(*l)) {
                        out.push(Finding::new(
                            rules::REL_TYPE_MISMATCH,
                            unit.span(&**v),
                            format!("`{}` returns a {} literal but is declared to return {}", f.qualified_name, lit.name(), ret.name()),
                        ));
                    }
                }
            });
        }
    }
    arity_mismatches(unit, &mut out);
    out
}
