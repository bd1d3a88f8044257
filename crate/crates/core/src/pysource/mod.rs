//! Python source parsing, positions, and the structural index analyzers use.

mod bindings;
mod fence;
pub mod walk;

use std::fmt;
use std::sync::Arc;

use rustpython_parser::ast::{self, Constant, Expr, ExprCall, Ranged, Stmt};
use rustpython_parser::text_size::TextRange;
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};

pub use bindings::ImportBindings;
pub use fence::{extract_code_blocks, CodeBlock};
use walk::function_parts;

/// A region of a source file. Lines are 1-based, columns are 0-based
/// character offsets (a tab is one column).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub file_label: String,
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl Span {
    pub fn new(
        file_label: impl Into<String>,
        start_line: usize,
        start_col: usize,
        end_line: usize,
        end_col: usize,
    ) -> Self {
        debug_assert!(start_line <= end_line);
        debug_assert!(start_line < end_line || start_col <= end_col);
        Self {
            file_label: file_label.into(),
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }

    /// Zero-width span at the start of a line.
    pub fn line(file_label: impl Into<String>, line: usize) -> Self {
        Self::new(file_label, line, 0, line, 0)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file_label, self.start_line, self.start_col)
    }
}

/// Byte offset to (line, column) translation.
#[derive(Debug, Clone)]
pub struct LineIndex {
    line_starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { line_starts }
    }

    /// 1-based line and 0-based character column of a byte offset.
    pub fn position(&self, text: &str, offset: usize) -> (usize, usize) {
        let offset = offset.min(text.len());
        let line = self.line_starts.partition_point(|&s| s <= offset);
        let start = self.line_starts[line - 1];
        let col = text.get(start..offset).map_or(0, |s| s.chars().count());
        (line, col)
    }
}

/// Number of newline-delimited lines, ignoring a single trailing newline.
pub fn count_lines(text: &str) -> usize {
    text.lines().count()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{file_label}:{line}:{column}: syntax error: {message}")]
pub struct ParseFailure {
    pub file_label: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct FunctionInfo {
    pub name: String,
    pub qualified_name: String,
    /// All declared parameters, `self`/`cls`, `*args` and `**kwargs` included.
    pub parameter_count: usize,
    pub annotated_parameter_count: usize,
    pub has_docstring: bool,
    pub has_return_annotation: bool,
    /// Name of the directly enclosing class, when this is a method.
    pub class_name: Option<String>,
    /// Defined inside another function body.
    pub is_nested: bool,
    pub is_async: bool,
    pub decorators: Vec<String>,
    pub span: Span,
    pub node: Arc<Stmt>,
}

impl FunctionInfo {
    pub fn parts(&self) -> walk::FnParts<'_> {
        function_parts(&self.node).expect("function index holds only function definitions")
    }

    pub fn body(&self) -> &[Stmt] {
        self.parts().body
    }

    pub fn is_method(&self) -> bool {
        self.class_name.is_some()
    }

    pub fn is_dunder(&self) -> bool {
        self.name.len() > 4 && self.name.starts_with("__") && self.name.ends_with("__")
    }

    pub fn is_private(&self) -> bool {
        self.name.starts_with('_') && !self.is_dunder()
    }

    pub fn is_staticmethod(&self) -> bool {
        self.decorators.iter().any(|d| d == "staticmethod")
    }

    /// Whether the first positional parameter is the implicit receiver.
    pub fn has_receiver(&self) -> bool {
        self.is_method() && !self.is_staticmethod() && self.positional_names().next().is_some()
    }

    /// Parameter count without the implicit `self`/`cls` receiver.
    pub fn explicit_parameter_count(&self) -> usize {
        self.parameter_count - usize::from(self.has_receiver())
    }

    pub fn positional_names(&self) -> impl Iterator<Item = &str> {
        let args = self.parts().args;
        args.posonlyargs
            .iter()
            .chain(&args.args)
            .map(|a| a.def.arg.as_str())
    }

    pub fn receiver_name(&self) -> Option<&str> {
        if self.has_receiver() {
            self.positional_names().next()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassInfo {
    pub name: String,
    pub qualified_name: String,
    pub has_docstring: bool,
    pub is_nested: bool,
    pub span: Span,
    pub node: Arc<Stmt>,
}

impl ClassInfo {
    pub fn body(&self) -> &[Stmt] {
        match &*self.node {
            Stmt::ClassDef(c) => &c.body,
            _ => unreachable!("class index holds only class definitions"),
        }
    }
}

/// One parsed Python file or snippet. Immutable once indexed.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub file_label: String,
    pub source_text: String,
    pub syntax_root: Vec<Stmt>,
    pub line_count: usize,
    pub function_index: Vec<FunctionInfo>,
    pub class_index: Vec<ClassInfo>,
    pub bindings: ImportBindings,
    lines: LineIndex,
}

impl SourceUnit {
    pub fn span_of(&self, range: TextRange) -> Span {
        let clamp = |line: usize| line.clamp(1, self.line_count.max(1));
        let (start_line, start_col) = self.lines.position(&self.source_text, range.start().into());
        let (end_line, end_col) = self.lines.position(&self.source_text, range.end().into());
        let (sl, el) = (clamp(start_line), clamp(end_line));
        let (sc, ec) = if sl == el && end_col < start_col {
            (start_col, start_col)
        } else {
            (start_col, end_col)
        };
        Span::new(self.file_label.clone(), sl, sc, el.max(sl), ec)
    }

    pub fn span<N: Ranged>(&self, node: &N) -> Span {
        self.span_of(node.range())
    }

    /// Whole-file span, used for module-level findings.
    pub fn file_span(&self) -> Span {
        let last = self.line_count.max(1);
        let end_col = self
            .source_text
            .lines()
            .nth(last - 1)
            .map_or(0, |l| l.chars().count());
        Span::new(self.file_label.clone(), 1, 0, last, end_col)
    }

    /// The first line of `span`, from its start column to the end of the
    /// line. Used to report compound statements at their header.
    pub fn header_span(&self, span: &Span) -> Span {
        let line_len = self
            .source_text
            .lines()
            .nth(span.start_line - 1)
            .map_or(0, |l| l.chars().count());
        Span::new(
            self.file_label.clone(),
            span.start_line,
            span.start_col,
            span.start_line,
            line_len.max(span.start_col),
        )
    }

    pub fn module_docstring(&self) -> Option<&str> {
        docstring(&self.syntax_root)
    }

    pub fn function(&self, qualified_name: &str) -> Option<&FunctionInfo> {
        self.function_index
            .iter()
            .find(|f| f.qualified_name == qualified_name)
    }

    pub fn class(&self, qualified_name: &str) -> Option<&ClassInfo> {
        self.class_index
            .iter()
            .find(|c| c.qualified_name == qualified_name)
    }

    /// Source text covered by a range.
    pub fn text_of(&self, range: TextRange) -> &str {
        let (start, end): (usize, usize) = (range.start().into(), range.end().into());
        self.source_text.get(start..end).unwrap_or("")
    }
}

/// Parse Python source text and index its functions and classes.
///
/// A syntax error is returned as a value; callers decide whether it is fatal.
pub fn parse_source(
    file_label: impl Into<String>,
    source_text: impl Into<String>,
) -> Result<SourceUnit, ParseFailure> {
    let file_label = file_label.into();
    let source_text = source_text.into();
    let lines = LineIndex::new(&source_text);
    let line_count = count_lines(&source_text);
    let syntax_root = match ast::Suite::parse(&source_text, &file_label) {
        Ok(suite) => suite,
        Err(err) => {
            let (line, column) = lines.position(&source_text, err.offset.into());
            return Err(ParseFailure {
                line: line.clamp(1, line_count.max(1)),
                column,
                message: err.error.to_string(),
                file_label,
            });
        }
    };
    let unit = SourceUnit {
        file_label,
        source_text,
        syntax_root,
        line_count,
        function_index: Vec::new(),
        class_index: Vec::new(),
        bindings: ImportBindings::default(),
        lines,
    };
    Ok(index_structure(unit))
}

/// Populate the function/class index and import bindings. Idempotent.
pub fn index_structure(mut unit: SourceUnit) -> SourceUnit {
    let mut indexer = Indexer {
        unit: &unit,
        functions: Vec::new(),
        classes: Vec::new(),
    };
    indexer.index_body(&unit.syntax_root, &[], Context::Module);
    let (functions, classes) = (indexer.functions, indexer.classes);
    unit.function_index = functions;
    unit.class_index = classes;
    unit.bindings = ImportBindings::collect(&unit.syntax_root);
    unit
}

#[derive(Clone, Copy, PartialEq)]
enum Context<'a> {
    Module,
    Class(&'a str),
    Function,
}

struct Indexer<'u> {
    unit: &'u SourceUnit,
    functions: Vec<FunctionInfo>,
    classes: Vec<ClassInfo>,
}

impl Indexer<'_> {
    fn index_body(&mut self, body: &[Stmt], path: &[String], ctx: Context<'_>) {
        for stmt in body {
            self.index_stmt(stmt, path, ctx);
        }
    }

    fn index_stmt(&mut self, stmt: &Stmt, path: &[String], ctx: Context<'_>) {
        let qualify = |name: &str| {
            let mut parts = path.to_vec();
            parts.push(name.to_string());
            parts.join(".")
        };
        if let Some(parts) = function_parts(stmt) {
            let args = parts.args;
            let mut parameter_count = 0;
            let mut annotated = 0;
            for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
                parameter_count += 1;
                annotated += usize::from(a.def.annotation.is_some());
            }
            for a in args.vararg.iter().chain(&args.kwarg) {
                parameter_count += 1;
                annotated += usize::from(a.annotation.is_some());
            }
            let qualified_name = qualify(parts.name);
            self.functions.push(FunctionInfo {
                name: parts.name.to_string(),
                qualified_name: qualified_name.clone(),
                parameter_count,
                annotated_parameter_count: annotated,
                has_docstring: docstring(parts.body).is_some(),
                has_return_annotation: parts.returns.is_some(),
                class_name: match ctx {
                    Context::Class(name) => Some(name.to_string()),
                    _ => None,
                },
                is_nested: ctx == Context::Function,
                is_async: parts.is_async,
                decorators: parts.decorators.iter().filter_map(dotted_name).collect(),
                span: self.unit.span(stmt),
                node: Arc::new(stmt.clone()),
            });
            let mut inner = path.to_vec();
            inner.push(parts.name.to_string());
            self.index_body(parts.body, &inner, Context::Function);
            return;
        }
        if let Stmt::ClassDef(class) = stmt {
            self.classes.push(ClassInfo {
                name: class.name.to_string(),
                qualified_name: qualify(&class.name),
                has_docstring: docstring(&class.body).is_some(),
                is_nested: ctx != Context::Module,
                span: self.unit.span(stmt),
                node: Arc::new(stmt.clone()),
            });
            let mut inner = path.to_vec();
            inner.push(class.name.to_string());
            self.index_body(&class.body, &inner, Context::Class(&class.name));
            return;
        }
        // Definitions under `if`, `try`, loops, etc. belong to the same context.
        for block in walk::child_blocks(stmt) {
            self.index_body(block, path, ctx);
        }
    }
}

/// The docstring of a module, class or function body, if present.
pub fn docstring(body: &[Stmt]) -> Option<&str> {
    match body.first() {
        Some(Stmt::Expr(e)) => string_literal(&e.value),
        _ => None,
    }
}

/// The value of a plain string literal expression.
pub fn string_literal(expr: &Expr) -> Option<&str> {
    match expr {
        Expr::Constant(c) => match &c.value {
            Constant::Str(s) => Some(s.as_str()),
            _ => None,
        },
        _ => None,
    }
}

/// `a.b.c` for a chain of attribute accesses rooted at a name.
pub fn dotted_name(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => dotted_name(&a.value).map(|base| format!("{base}.{}", a.attr)),
        Expr::Call(c) => dotted_name(&c.func),
        _ => None,
    }
}

/// Final identifier of a name or attribute target (`self.api_key` -> `api_key`).
pub fn target_name(expr: &Expr) -> Option<&str> {
    match expr {
        Expr::Name(n) => Some(n.id.as_str()),
        Expr::Attribute(a) => Some(a.attr.as_str()),
        _ => None,
    }
}

/// A call argument given by keyword.
pub fn keyword_arg<'a>(call: &'a ExprCall, name: &str) -> Option<&'a Expr> {
    call.keywords
        .iter()
        .find(|k| k.arg.as_ref().is_some_and(|a| a.as_str() == name))
        .map(|k| &k.value)
}

/// A call argument given either at `position` or by keyword `name`.
pub fn call_arg<'a>(call: &'a ExprCall, position: usize, name: &str) -> Option<&'a Expr> {
    match call.args.get(position) {
        Some(Expr::Starred(_)) | None => keyword_arg(call, name),
        Some(arg) => Some(arg),
    }
}

/// Constant whose Python truth value is known.
pub fn constant_truth(expr: &Expr) -> Option<bool> {
    let Expr::Constant(c) = expr else { return None };
    Some(match &c.value {
        Constant::None => false,
        Constant::Bool(b) => *b,
        Constant::Str(s) => !s.is_empty(),
        Constant::Bytes(b) => !b.is_empty(),
        Constant::Int(i) => i.to_string() != "0",
        Constant::Float(f) => *f != 0.0,
        Constant::Complex { real, imag } => *real != 0.0 || *imag != 0.0,
        Constant::Tuple(t) => !t.is_empty(),
        Constant::Ellipsis => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(src: &str) -> SourceUnit {
        parse_source("a.py", src).expect("fixture parses")
    }

    #[test]
    fn minimal_program() {
        let u = unit("x = 1\n");
        assert_eq!(u.line_count, 1);
        assert!(u.function_index.is_empty());
        assert!(u.class_index.is_empty());
    }

    #[test]
    fn malformed_header_fails_on_line_one() {
        let err = parse_source("a.py", "def f(:\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.file_label, "a.py");
    }

    #[test]
    fn error_line_is_first_bad_line() {
        let err = parse_source("a.py", "x = 1\ny = 2\nif x\n    pass\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn two_parameter_function() {
        let u = unit("def f(a, b):\n    return a\n");
        assert_eq!(u.function_index.len(), 1);
        let f = &u.function_index[0];
        assert_eq!(f.parameter_count, 2);
        assert!(!f.has_docstring);
        assert_eq!(f.span.start_line, 1);
        assert_eq!(f.span.end_line, 2);
    }

    #[test]
    fn method_is_indexed_under_class() {
        let u = unit("class C:\n    def m(self): pass\n");
        assert_eq!(u.class_index.len(), 1);
        assert_eq!(u.function_index.len(), 1);
        let m = &u.function_index[0];
        assert_eq!(m.parameter_count, 1);
        assert_eq!(m.qualified_name, "C.m");
        assert_eq!(m.class_name.as_deref(), Some("C"));
        assert_eq!(m.explicit_parameter_count(), 0);
    }

    #[test]
    fn empty_unit_has_empty_indices() {
        let u = unit("");
        assert_eq!(u.line_count, 0);
        assert!(u.function_index.is_empty());
        assert!(u.class_index.is_empty());
    }

    #[test]
    fn docstring_and_annotations() {
        let u = unit("def g(a: int) -> int:\n    '''doc'''\n    return a\n");
        let g = &u.function_index[0];
        assert!(g.has_docstring);
        assert!(g.has_return_annotation);
        assert_eq!(g.annotated_parameter_count, 1);
    }

    #[test]
    fn nested_definitions_are_indexed() {
        let src = "\
def outer():
    def inner(*args, **kw):
        pass
    if True:
        class Local:
            pass
    return inner
";
        let u = unit(src);
        let names: Vec<_> = u.function_index.iter().map(|f| f.qualified_name.as_str()).collect();
        assert_eq!(names, ["outer", "outer.inner"]);
        assert!(u.function_index[1].is_nested);
        assert_eq!(u.function_index[1].parameter_count, 2);
        assert_eq!(u.class_index[0].qualified_name, "outer.Local");
    }

    #[test]
    fn staticmethod_has_no_receiver() {
        let u = unit("class C:\n    @staticmethod\n    def s(a, b): pass\n");
        assert_eq!(u.function_index[0].explicit_parameter_count(), 2);
    }

    #[test]
    fn tabs_count_as_one_column() {
        let u = unit("if True:\n\tx = 1\n");
        let Stmt::If(s) = &u.syntax_root[0] else { panic!() };
        let span = u.span(&s.body[0]);
        assert_eq!((span.start_line, span.start_col), (2, 1));
    }

    #[test]
    fn columns_count_characters_not_bytes() {
        let u = unit("s = 'é'; t = 1\n");
        let span = u.span(&u.syntax_root[1]);
        assert_eq!(span.start_col, 9);
    }

    #[test]
    fn line_count_matches_lines() {
        assert_eq!(count_lines("a\nb"), 2);
        assert_eq!(count_lines("a\nb\n"), 2);
        assert_eq!(count_lines("\n\n"), 2);
        assert_eq!(count_lines(""), 0);
    }

    #[test]
    fn reparse_is_structurally_identical() {
        let src = "class A:\n    def f(self, x: int) -> int:\n        return x\n\ndef g(): pass\n";
        let a = unit(src);
        let b = unit(src);
        let key = |u: &SourceUnit| {
            u.function_index
                .iter()
                .map(|f| (f.qualified_name.clone(), f.parameter_count, f.span.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b));
        assert_eq!(a.syntax_root, b.syntax_root);
    }

    #[test]
    fn index_structure_is_idempotent() {
        let u = unit("def f(): pass\nclass K: pass\n");
        let again = index_structure(u.clone());
        assert_eq!(again.function_index.len(), u.function_index.len());
        assert_eq!(again.class_index.len(), u.class_index.len());
    }
}
