//! The rule catalog: one row per detectable issue, with its category,
//! default severity, CWE mapping, and documented escalation.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{Category, RegistryError, Severity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleDescriptor {
    pub rule_id: &'static str,
    pub category: Category,
    pub default_severity: Severity,
    /// The only other severity this rule may report at.
    pub escalates_to: Option<Severity>,
    pub cwe_id: Option<&'static str>,
    pub title: &'static str,
    pub description: &'static str,
}

/// Exported catalog record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub rule_id: String,
    pub category: Category,
    pub default_severity: Severity,
    pub cwe_id: Option<String>,
    pub title: String,
}

pub mod rules {
    pub const MAINT_CYCLOMATIC: &str = "MAINT-CYCLOMATIC";
    pub const MAINT_COMPLEX_CLASS: &str = "MAINT-COMPLEX-CLASS";
    pub const MAINT_UNUSED_IMPORT: &str = "MAINT-UNUSED-IMPORT";
    pub const MAINT_UNUSED_FUNCTION: &str = "MAINT-UNUSED-FUNCTION";
    pub const MAINT_UNUSED_CLASS: &str = "MAINT-UNUSED-CLASS";
    pub const MAINT_UNUSED_VARIABLE: &str = "MAINT-UNUSED-VARIABLE";
    pub const MAINT_TOO_MANY_ARGS: &str = "MAINT-TOO-MANY-ARGS";
    pub const MAINT_TOO_MANY_ATTRIBUTES: &str = "MAINT-TOO-MANY-ATTRIBUTES";
    pub const MAINT_LARGE_FILE: &str = "MAINT-LARGE-FILE";
    pub const MAINT_TOO_MANY_BRANCHES: &str = "MAINT-TOO-MANY-BRANCHES";
    pub const MAINT_TOO_MANY_RETURNS: &str = "MAINT-TOO-MANY-RETURNS";
    pub const MAINT_DEEP_NESTING: &str = "MAINT-DEEP-NESTING";
    pub const MAINT_MISSING_DOCSTRING: &str = "MAINT-MISSING-DOCSTRING";
    pub const MAINT_NAMING: &str = "MAINT-NAMING";

    pub const SEC_SHELL_INJECTION: &str = "SEC-SHELL-INJECTION";
    pub const SEC_SUBPROCESS_SHELL: &str = "SEC-SUBPROCESS-SHELL";
    pub const SEC_EVAL_EXEC: &str = "SEC-EVAL-EXEC";
    pub const SEC_PICKLE: &str = "SEC-PICKLE";
    pub const SEC_YAML_LOAD: &str = "SEC-YAML-LOAD";
    pub const SEC_XML_PARSE: &str = "SEC-XML-PARSE";
    pub const SEC_WEAK_HASH: &str = "SEC-WEAK-HASH";
    pub const SEC_INSECURE_RANDOM: &str = "SEC-INSECURE-RANDOM";
    pub const SEC_HARDCODED_SECRET: &str = "SEC-HARDCODED-SECRET";
    pub const SEC_VULNERABLE_DEPENDENCY: &str = "SEC-VULNERABLE-DEPENDENCY";
    pub const SEC_UNPARSEABLE_REQUIREMENT: &str = "SEC-UNPARSEABLE-REQUIREMENT";

    pub const PERF_STRING_CONCAT_LOOP: &str = "PERF-STRING-CONCAT-LOOP";
    pub const PERF_IO_IN_LOOP: &str = "PERF-IO-IN-LOOP";
    pub const PERF_LOOP_INVARIANT_CALL: &str = "PERF-LOOP-INVARIANT-CALL";
    pub const PERF_CONTAINER_CONCAT_LOOP: &str = "PERF-CONTAINER-CONCAT-LOOP";
    pub const PERF_TOO_MANY_CLASS_ATTRIBUTES: &str = "PERF-TOO-MANY-CLASS-ATTRIBUTES";
    pub const PERF_DEEP_NESTING_LITERAL: &str = "PERF-DEEP-NESTING-LITERAL";
    pub const PERF_LARGE_DICT: &str = "PERF-LARGE-DICT";

    pub const REL_BARE_EXCEPT: &str = "REL-BARE-EXCEPT";
    pub const REL_EMPTY_EXCEPT: &str = "REL-EMPTY-EXCEPT";
    pub const REL_BROAD_EXCEPT: &str = "REL-BROAD-EXCEPT";
    pub const REL_UNCLOSED_RESOURCE: &str = "REL-UNCLOSED-RESOURCE";
    pub const REL_LOCK_ORDER: &str = "REL-LOCK-ORDER";
    pub const REL_LOCK_NOT_RELEASED: &str = "REL-LOCK-NOT-RELEASED";
    pub const REL_INFINITE_LOOP: &str = "REL-INFINITE-LOOP";
    pub const REL_UNCHANGING_LOOP_CONDITION: &str = "REL-UNCHANGING-LOOP-CONDITION";
    pub const REL_MISSING_ANNOTATION: &str = "REL-MISSING-ANNOTATION";
    pub const REL_TYPE_MISMATCH: &str = "REL-TYPE-MISMATCH";
    pub const REL_ARITY_MISMATCH: &str = "REL-ARITY-MISMATCH";
    pub const REL_EXTERNAL_TYPE: &str = "REL-EXTERNAL-TYPE";

    pub const PARSE_ERROR: &str = "PARSE-ERROR";
}

use Category::*;
use Severity::*;

macro_rules! rule {
    ($id:expr, $cat:expr, $sev:expr, $esc:expr, $cwe:expr, $title:expr, $desc:expr) => {
        RuleDescriptor {
            rule_id: $id,
            category: $cat,
            default_severity: $sev,
            escalates_to: $esc,
            cwe_id: $cwe,
            title: $title,
            description: $desc,
        }
    };
}

const TABLE: &[RuleDescriptor] = &[
    // Maintainability: complexity
    rule!(rules::MAINT_CYCLOMATIC, Maintainability, Medium, Some(High), Some("CWE-1121"),
        "Excessive cyclomatic complexity",
        "Function complexity above the medium threshold; escalates to high above the high threshold (one finding per function)."),
    rule!(rules::MAINT_COMPLEX_CLASS, Maintainability, Medium, None, Some("CWE-1121"),
        "Class with overly complex methods",
        "The most complex method of the class exceeds the high cyclomatic threshold."),
    // Maintainability: dead code
    rule!(rules::MAINT_UNUSED_IMPORT, Maintainability, Low, None, Some("CWE-1164"),
        "Unused import",
        "An imported name is never referenced in the file."),
    rule!(rules::MAINT_UNUSED_FUNCTION, Maintainability, Low, None, Some("CWE-561"),
        "Unused function",
        "A module-level function is never referenced in the file."),
    rule!(rules::MAINT_UNUSED_CLASS, Maintainability, Low, None, Some("CWE-561"),
        "Unused class",
        "A module-level class is never referenced in the file."),
    rule!(rules::MAINT_UNUSED_VARIABLE, Maintainability, Low, None, Some("CWE-563"),
        "Unused variable",
        "A variable is assigned but never read in its scope."),
    // Maintainability: structure
    rule!(rules::MAINT_TOO_MANY_ARGS, Maintainability, Medium, None, Some("CWE-1064"),
        "Excessive function arguments",
        "More parameters than the configured maximum, excluding self/cls."),
    rule!(rules::MAINT_TOO_MANY_ATTRIBUTES, Maintainability, Medium, None, Some("CWE-1093"),
        "Too many instance attributes",
        "More distinct attributes assigned on self than the configured maximum."),
    rule!(rules::MAINT_LARGE_FILE, Maintainability, Medium, None, Some("CWE-1080"),
        "Large file",
        "The file has more lines than the configured maximum (1000 by default)."),
    rule!(rules::MAINT_TOO_MANY_BRANCHES, Maintainability, Medium, None, None,
        "Excessive branches",
        "A function has more if/elif/loop/except/case branches than the configured maximum."),
    rule!(rules::MAINT_TOO_MANY_RETURNS, Maintainability, Medium, None, None,
        "Excessive returns",
        "A function has more return statements than the configured maximum."),
    rule!(rules::MAINT_DEEP_NESTING, Maintainability, Medium, None, Some("CWE-1124"),
        "Excessively deep nesting",
        "Compound statements inside a function nest deeper than the configured maximum."),
    // Maintainability: style and documentation
    rule!(rules::MAINT_MISSING_DOCSTRING, Maintainability, Info, None, None,
        "Missing docstring",
        "A public function, class, or long module has no docstring."),
    rule!(rules::MAINT_NAMING, Maintainability, Low, None, None,
        "Poor naming convention",
        "Functions and variables should be lower_snake_case, classes CapWords."),
    // Security: injection
    rule!(rules::SEC_SHELL_INJECTION, Security, High, Some(Critical), Some("CWE-78"),
        "Shell injection via os.system/os.popen",
        "Runs a command through the shell; critical when the command is built by string interpolation."),
    rule!(rules::SEC_SUBPROCESS_SHELL, Security, High, Some(Critical), Some("CWE-78"),
        "Unsafe subprocess call",
        "subprocess invoked with shell enabled; critical when the command is built by string interpolation."),
    rule!(rules::SEC_EVAL_EXEC, Security, High, None, Some("CWE-95"),
        "Command injection risk via eval/exec",
        "eval or exec applied to a non-literal argument."),
    // Security: unsafe data handling
    rule!(rules::SEC_PICKLE, Security, High, None, Some("CWE-502"),
        "Insecure deserialization (pickle family)",
        "pickle, cPickle, dill, marshal or shelve used to load data."),
    rule!(rules::SEC_YAML_LOAD, Security, High, None, Some("CWE-502"),
        "Insecure YAML load",
        "yaml.load/load_all without a safe loader, or yaml.unsafe_load."),
    rule!(rules::SEC_XML_PARSE, Security, Medium, None, Some("CWE-611"),
        "Insecure XML parsing",
        "Standard-library XML parser applied to non-literal input."),
    // Security: cryptography
    rule!(rules::SEC_WEAK_HASH, Security, Medium, None, Some("CWE-327"),
        "Weak hash algorithm",
        "MD5 or SHA1 constructed without usedforsecurity=False."),
    rule!(rules::SEC_INSECURE_RANDOM, Security, Medium, None, Some("CWE-330"),
        "Insecure random generation",
        "The random module feeds a value whose name suggests a secret."),
    rule!(rules::SEC_HARDCODED_SECRET, Security, Critical, None, Some("CWE-798"),
        "Hard-coded secret",
        "A string literal bound to a secret-like name, or a high-entropy token literal."),
    // Security: dependencies
    rule!(rules::SEC_VULNERABLE_DEPENDENCY, Security, High, None, Some("CWE-1395"),
        "Known vulnerable package",
        "A pinned requirement falls inside a vulnerable range of the advisory database."),
    rule!(rules::SEC_UNPARSEABLE_REQUIREMENT, Security, Info, None, None,
        "Unparseable requirement",
        "A requirements line could not be parsed and was not checked."),
    // Performance
    rule!(rules::PERF_STRING_CONCAT_LOOP, Performance, Medium, None, Some("CWE-1046"),
        "String concatenation in loop",
        "A string accumulator grows with + or += inside a loop body."),
    rule!(rules::PERF_IO_IN_LOOP, Performance, Medium, None, Some("CWE-1050"),
        "File or network I/O in loop",
        "open(), socket/connection creation, or HTTP request calls (urlopen, requests.*, httpx.*, *.connect, socket.*) inside a loop."),
    rule!(rules::PERF_LOOP_INVARIANT_CALL, Performance, Low, None, None,
        "Loop-invariant call in loop condition",
        "A while-condition recomputes a call whose arguments never change in the loop."),
    rule!(rules::PERF_CONTAINER_CONCAT_LOOP, Performance, Low, None, None,
        "Growing list by concatenation in loop",
        "A list is rebuilt with `x = x + [...]` inside a loop instead of append/extend."),
    rule!(rules::PERF_TOO_MANY_CLASS_ATTRIBUTES, Performance, Low, None, None,
        "Excessive class attributes",
        "A class defines more distinct class and instance attributes than the configured maximum."),
    rule!(rules::PERF_DEEP_NESTING_LITERAL, Performance, Low, None, None,
        "Deeply nested data structure",
        "Container literals nest deeper than the configured maximum."),
    rule!(rules::PERF_LARGE_DICT, Performance, Low, None, None,
        "Large dictionary literal",
        "A dictionary literal has more entries than the configured maximum."),
    // Reliability: exceptions
    rule!(rules::REL_BARE_EXCEPT, Reliability, Medium, None, Some("CWE-396"),
        "Bare except clause",
        "`except:` without an exception type (also covers a bare handler that only passes)."),
    rule!(rules::REL_EMPTY_EXCEPT, Reliability, Medium, None, Some("CWE-390"),
        "Empty except clause",
        "A typed handler whose body only passes."),
    rule!(rules::REL_BROAD_EXCEPT, Reliability, Low, None, Some("CWE-396"),
        "Overly broad exception catching",
        "Catches Exception/BaseException without re-raising or logging."),
    rule!(rules::REL_UNCLOSED_RESOURCE, Reliability, Medium, None, Some("CWE-772"),
        "Missing resource cleanup",
        "A file opened into a name is never closed or used as a context manager in its scope."),
    // Reliability: concurrency
    rule!(rules::REL_LOCK_ORDER, Reliability, High, None, Some("CWE-833"),
        "Lock ordering issue",
        "Two locks are acquired in opposite orders by different functions."),
    rule!(rules::REL_LOCK_NOT_RELEASED, Reliability, High, None, Some("CWE-667"),
        "Missing lock release",
        "A lock acquired with acquire() is still held on some path out of the function."),
    // Reliability: infinite loops
    rule!(rules::REL_INFINITE_LOOP, Reliability, High, None, Some("CWE-835"),
        "While True without exit",
        "A `while True` loop contains no break, return, raise, or exit call."),
    rule!(rules::REL_UNCHANGING_LOOP_CONDITION, Reliability, Medium, None, Some("CWE-835"),
        "Unchanging loop condition",
        "No name in a while-condition is assigned or mutated in the loop body."),
    // Reliability: type safety
    rule!(rules::REL_MISSING_ANNOTATION, Reliability, Info, None, None,
        "Missing type annotations",
        "A public function lacks parameter or return annotations."),
    rule!(rules::REL_TYPE_MISMATCH, Reliability, Low, None, None,
        "Type inconsistency",
        "A name annotated with a builtin scalar type is assigned a literal of another scalar type."),
    rule!(rules::REL_ARITY_MISMATCH, Reliability, Low, None, Some("CWE-685"),
        "Incorrect argument count",
        "A call to a function defined in the same file does not match its signature."),
    rule!(rules::REL_EXTERNAL_TYPE, Reliability, Low, None, None,
        "External type-checker report",
        "A diagnostic imported from an external type checker's report."),
    rule!(rules::PARSE_ERROR, Reliability, Critical, None, None,
        "Unparseable source",
        "The file is not valid Python; scored as a single critical finding."),
];

/// All rule descriptors keyed by rule id.
pub fn registry() -> &'static BTreeMap<&'static str, RuleDescriptor> {
    static REGISTRY: OnceLock<BTreeMap<&'static str, RuleDescriptor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let map: BTreeMap<_, _> = TABLE.iter().map(|r| (r.rule_id, r.clone())).collect();
        assert_eq!(map.len(), TABLE.len(), "duplicate rule id in registry");
        map
    })
}

pub fn registry_lookup(rule_id: &str) -> Result<&'static RuleDescriptor, RegistryError> {
    registry()
        .get(rule_id)
        .ok_or_else(|| RegistryError::UnknownRule(rule_id.to_string()))
}

/// Rule catalog ordered by rule id, optionally restricted to one category.
pub fn catalog(category: Option<Category>) -> Vec<CatalogEntry> {
    registry()
        .values()
        .filter(|r| category.is_none_or(|c| r.category == c))
        .map(|r| CatalogEntry {
            rule_id: r.rule_id.to_string(),
            category: r.category,
            default_severity: r.default_severity,
            cwe_id: r.cwe_id.map(str::to_string),
            title: r.title.to_string(),
        })
        .collect()
}
