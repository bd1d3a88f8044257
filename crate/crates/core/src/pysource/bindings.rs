use std::collections::BTreeMap;

use rustpython_parser::ast::{Expr, Stmt};

use super::walk::for_each_stmt_in_scope;

/// Local names introduced by `import` statements, mapped to the fully
/// qualified module path they stand for.
///
/// `import os as o` binds `o -> os`; `from subprocess import run` binds
/// `run -> subprocess.run`. Imports anywhere in the file count; shadowing by
/// later assignment is not tracked.
#[derive(Debug, Clone, Default)]
pub struct ImportBindings {
    names: BTreeMap<String, String>,
}

impl ImportBindings {
    pub fn collect(body: &[Stmt]) -> Self {
        let mut names = BTreeMap::new();
        collect_into(body, &mut names);
        Self { names }
    }

    pub fn get(&self, local: &str) -> Option<&str> {
        self.names.get(local).map(String::as_str)
    }

    pub fn is_bound(&self, local: &str) -> bool {
        self.names.contains_key(local)
    }

    /// Resolve a name or attribute chain to its qualified dotted path.
    /// Unbound roots (builtins, locals) are returned unchanged.
    pub fn resolve(&self, expr: &Expr) -> Option<String> {
        match expr {
            Expr::Name(n) => Some(
                self.get(n.id.as_str())
                    .map_or_else(|| n.id.to_string(), str::to_string),
            ),
            Expr::Attribute(a) => self.resolve(&a.value).map(|base| format!("{base}.{}", a.attr)),
            _ => None,
        }
    }

    /// Qualified name of the callee of a call expression.
    pub fn callee(&self, expr: &Expr) -> Option<String> {
        match expr {
            Expr::Call(c) => self.resolve(&c.func),
            _ => None,
        }
    }
}

fn collect_into(body: &[Stmt], names: &mut BTreeMap<String, String>) {
    let mut visit = |stmt: &Stmt| match stmt {
        Stmt::Import(import) => {
            for alias in &import.names {
                match &alias.asname {
                    Some(asname) => {
                        names.insert(asname.to_string(), alias.name.to_string());
                    }
                    None => {
                        // `import a.b` binds `a`.
                        let root = alias.name.split('.').next().unwrap_or_default();
                        names.insert(root.to_string(), root.to_string());
                    }
                }
            }
        }
        Stmt::ImportFrom(import) => {
            let module = import.module.as_ref().map_or("", |m| m.as_str());
            for alias in &import.names {
                if alias.name.as_str() == "*" {
                    continue;
                }
                let local = alias.asname.as_ref().unwrap_or(&alias.name);
                let qualified = if module.is_empty() {
                    alias.name.to_string()
                } else {
                    format!("{module}.{}", alias.name)
                };
                names.insert(local.to_string(), qualified);
            }
        }
        _ => {}
    };
    fn recurse(body: &[Stmt], visit: &mut dyn FnMut(&Stmt)) {
        for_each_stmt_in_scope(body, &mut |stmt| {
            visit(stmt);
            match stmt {
                Stmt::FunctionDef(f) => recurse(&f.body, visit),
                Stmt::AsyncFunctionDef(f) => recurse(&f.body, visit),
                Stmt::ClassDef(c) => recurse(&c.body, visit),
                _ => {}
            }
        });
    }
    recurse(body, &mut visit);
}
