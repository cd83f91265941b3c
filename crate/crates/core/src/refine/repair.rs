use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::debug;
use serde::{Deserialize, Serialize};

use super::ErrorKind;
use crate::context::ContextBundle;
use crate::generate::{
    push_context_sections, push_diff_section, push_imports_section, push_response_format, GeneratedUpdate, SYSTEM_ROLE,
};
use crate::java::{find_word, is_ident_byte, line_start, mask, JavaSource};
use crate::llm::ChatMessage;
use crate::model::{MethodChange, TestTarget};
use crate::workspace::{lsp_position, Declaration, SourcePosition, SymbolIndex};

pub const DEFINITION_UNAVAILABLE: &str = "definition unavailable";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairContext {
    pub error: ErrorKind,
    /// Offending source line(s) of the spliced test file.
    pub excerpt: String,
    pub resolved: Option<Declaration>,
    /// Suggested import for the resolved declaration.
    pub import_hint: Option<String>,
    pub note: String,
}

fn line_text(text: &str, line: u32) -> Option<(usize, &str)> {
    let start = line_start(text, line.checked_sub(1)? as usize)?;
    let end = text[start..].find('\n').map_or(text.len(), |p| start + p);
    Some((start, text[start..end].trim_end_matches('\r')))
}

/// `import pkg.Type;` for the type that declares `decl`.
fn import_for(root: &Path, decl: &Declaration) -> Option<String> {
    let text = fs::read_to_string(root.join(&decl.location.file)).ok()?;
    let src = JavaSource::parse(&text);
    let package = src.package()?.name.clone();
    let class = match decl.kind {
        crate::workspace::SymbolKind::Class => decl.symbol.clone(),
        _ => src.top_level_type()?.name.clone(),
    };
    Some(format!("import {package}.{class};"))
}

/// Resolves `name` using its first occurrence on `line` as the hint.
fn lookup(
    index: &mut dyn SymbolIndex,
    test_file: &Path,
    text: &str,
    name: &str,
    line: Option<u32>,
    cap: usize,
) -> Option<Declaration> {
    if name.is_empty() {
        return None;
    }
    let masked = mask(text);
    let hint = line
        .and_then(|l| line_text(text, l))
        .and_then(|(start, _)| find_word(&masked, name, start))
        .map(|offset| SourcePosition {
            file: test_file.to_owned(),
            position: lsp_position(text, offset),
        });
    let resolution = match index.resolve(name, hint.as_ref()) {
        Ok(r) => r,
        Err(e) => {
            debug!("lookup of {name} failed: {e}");
            return None;
        }
    };
    let location = resolution.local.first()?;
    index.extract(name, location, cap).ok()
}

/// `qualifier` in `qualifier.symbol` on the error line, if any.
fn qualifier_of(line: &str, symbol: &str) -> Option<String> {
    let masked = mask(line);
    let at = find_word(&masked, symbol, 0)?;
    let before = line[..at].trim_end();
    let before = before.strip_suffix('.')?.trim_end();
    let start = before
        .bytes()
        .rposition(|b| !is_ident_byte(b))
        .map_or(0, |p| p + 1);
    let q = &before[start..];
    (!q.is_empty()).then(|| q.to_owned())
}

/// Targeted context for one classified error.
pub fn gather_repair_context(
    error: &ErrorKind,
    index: Option<&mut dyn SymbolIndex>,
    spliced_file: &str,
    test_file: &Path,
    cap: usize,
) -> RepairContext {
    let line = error.line();
    let excerpt = line
        .and_then(|l| line_text(spliced_file, l))
        .map(|(_, t)| t.trim().to_owned())
        .unwrap_or_default();
    let mut ctx = RepairContext {
        error: error.clone(),
        excerpt,
        resolved: None,
        import_hint: None,
        note: String::new(),
    };
    match error {
        ErrorKind::MissingSymbol { symbol, .. } | ErrorKind::ArgumentMismatch { callee: symbol, .. } => {
            if let Some(index) = index {
                ctx.resolved = lookup(index, test_file, spliced_file, symbol, line, cap);
                if ctx.resolved.is_none() && matches!(error, ErrorKind::MissingSymbol { .. }) {
                    if let Some(q) = qualifier_of(&ctx.excerpt, symbol) {
                        ctx.resolved = lookup(index, test_file, spliced_file, &q, line, cap);
                    }
                }
                if let Some(decl) = &ctx.resolved {
                    ctx.import_hint = import_for(index.project_root(), decl);
                }
            }
            ctx.note = match (&ctx.resolved, error) {
                (None, _) => DEFINITION_UNAVAILABLE.to_owned(),
                (Some(d), ErrorKind::MissingSymbol { .. }) => {
                    format!("`{}` is declared in `{}`", d.symbol, d.location.file.display())
                }
                (Some(d), _) => format!("definition of `{}` from `{}`", d.symbol, d.location.file.display()),
            };
        }
        ErrorKind::OtherCompile { message, .. } => {
            ctx.note = message.clone();
        }
        ErrorKind::AssertionFailure {
            expected, actual, ..
        } => {
            let src = JavaSource::parse(spliced_file);
            let statement = line.and_then(|l| line_text(spliced_file, l)).and_then(|(start, t)| {
                let first = start + (t.len() - t.trim_start().len());
                src.statement_at(first)
            });
            let assertion = statement.map(|r| spliced_file[r].to_owned());
            if let Some(a) = &assertion {
                ctx.excerpt = a.clone();
            }
            if let ErrorKind::AssertionFailure { assertion_source, .. } = &mut ctx.error {
                *assertion_source = assertion;
            }
            ctx.note = match (expected, actual) {
                (Some(e), Some(a)) => format!("expected `{e}` but was `{a}`"),
                _ => "assertion failed".to_owned(),
            };
        }
        ErrorKind::OtherRuntime { message, .. } => {
            ctx.note = message.clone();
        }
    }
    ctx
}

fn render_context(out: &mut String, c: &RepairContext) {
    let at = c.error.line().map(|l| format!(" at line {l}")).unwrap_or_default();
    match &c.error {
        ErrorKind::MissingSymbol { symbol, .. } => {
            let _ = writeln!(out, "#### Cannot find symbol `{symbol}`{at}");
        }
        ErrorKind::ArgumentMismatch { callee, .. } => {
            let _ = writeln!(out, "#### Arguments do not match `{callee}`{at}");
        }
        ErrorKind::OtherCompile { .. } => {
            let _ = writeln!(out, "#### Compilation error{at}");
        }
        ErrorKind::AssertionFailure { .. } => {
            let _ = writeln!(out, "#### Assertion failure{at}");
        }
        ErrorKind::OtherRuntime { .. } => {
            let _ = writeln!(out, "#### Runtime error{at}");
        }
    }
    if !c.excerpt.is_empty() {
        let _ = writeln!(out, "Offending code:\n```java\n{}\n```", c.excerpt);
    }
    match &c.error {
        ErrorKind::MissingSymbol { .. } | ErrorKind::ArgumentMismatch { .. } => match &c.resolved {
            Some(decl) => {
                let _ = writeln!(
                    out,
                    "Definition of `{}` from `{}`:\n```java\n{}\n```",
                    decl.symbol,
                    decl.location.file.display(),
                    decl.source
                );
                if matches!(c.error, ErrorKind::MissingSymbol { .. }) {
                    match &c.import_hint {
                        Some(import) => {
                            let _ = writeln!(out, "Add the missing import `{import}` if the test does not import it yet.");
                        }
                        None => {
                            let _ = writeln!(out, "Add the missing import for it if the test does not import it yet.");
                        }
                    }
                } else {
                    out.push_str("Pass arguments that match this definition.\n");
                }
            }
            None => {
                out.push_str(
                    "The definition is unavailable in the project. Make a conservative fix: do not invent new \
                     classes or methods, and only use what the test or the focal method already shows.\n",
                );
            }
        },
        ErrorKind::OtherCompile { message, .. } => {
            let _ = writeln!(out, "Compiler message:\n```\n{message}\n```");
        }
        ErrorKind::AssertionFailure { expected, actual, .. } => {
            let what = match (expected, actual) {
                (Some(e), Some(a)) => format!("expected `{e}` but was `{a}`"),
                _ => "the assertion did not hold".to_owned(),
            };
            let _ = writeln!(
                out,
                "The assertion failed: {what}. Fix the assertion or the test setup so it checks the updated \
                 behavior of the focal method."
            );
        }
        ErrorKind::OtherRuntime { message, .. } => {
            let _ = writeln!(out, "The test threw an exception:\n```\n{message}\n```");
        }
    }
    out.push('\n');
}

/// Prompt asking the model to fix `current` given the classified errors.
/// Compilation errors are listed before test failures.
pub fn build_repair_prompt(
    contexts: &[RepairContext],
    current: &GeneratedUpdate,
    change: &MethodChange,
    target: &TestTarget,
) -> Vec<ChatMessage> {
    let mut user = String::from("# Repair an updated unit test\n\nThe updated test method below does not pass yet.\n\n");
    let _ = write!(
        user,
        "## Current test method\nTest class `{}` in `{}`:\n```java\n{}\n```\n\n",
        target.test_class,
        target.test_file.display(),
        current.render()
    );
    push_diff_section(&mut user, change);
    let compile: Vec<_> = contexts.iter().filter(|c| c.error.is_compile_error()).collect();
    let runtime: Vec<_> = contexts.iter().filter(|c| !c.error.is_compile_error()).collect();
    user.push_str("## Errors\n");
    if !compile.is_empty() {
        user.push_str("### Compilation errors\n");
        for c in compile {
            render_context(&mut user, c);
        }
    }
    if !runtime.is_empty() {
        user.push_str("### Test failures\n");
        for c in runtime {
            render_context(&mut user, c);
        }
    }
    push_imports_section(&mut user, &target.existing_imports);
    user.push_str(
        "## Instructions\nFix every error listed above and keep the rest of the test unchanged. List all import \
         statements the method needs that are not among the existing imports, including ones from the current \
         version.\n\n",
    );
    push_response_format(&mut user, &target.test_method);
    vec![ChatMessage::system(SYSTEM_ROLE), ChatMessage::user(user)]
}

/// The minimal-modification prompt used once the repair budget is spent.
/// It edits the original test, not the failed update.
pub fn build_fallback_prompt(change: &MethodChange, target: &TestTarget, ctx: &ContextBundle) -> Vec<ChatMessage> {
    let mut user = String::from(
        "# Minimal test update\n\nEarlier attempts to update this test failed. Make the smallest change to the \
         original test method so that it compiles and runs against the updated focal method.\n\n",
    );
    push_diff_section(&mut user, change);
    let _ = write!(
        user,
        "## Original test method\nTest class `{}` in `{}`:\n```java\n{}\n```\n\n",
        target.test_class,
        target.test_file.display(),
        target.original_source
    );
    push_context_sections(&mut user, ctx);
    push_imports_section(&mut user, &target.existing_imports);
    user.push_str("## Instructions\n1. Do not add new test logic. Keep the original assertions.\n");
    let params = change.added_parameters();
    if change.signature_changed() {
        if params.is_empty() {
            user.push_str("2. Adjust the calls to the focal method to its new signature.\n");
        } else {
            let names: Vec<String> = params.iter().map(|p| format!("`{p}`")).collect();
            let _ = writeln!(
                user,
                "2. Assign default values to the new parameters ({}), or use existing mocks from the test class.",
                names.join(", ")
            );
        }
    } else {
        user.push_str("2. The focal method's signature is unchanged: only repair the original test.\n");
    }
    user.push_str("3. Add imports only if the minimal change needs them.\n\n");
    push_response_format(&mut user, &target.test_method);
    vec![ChatMessage::system(SYSTEM_ROLE), ChatMessage::user(user)]
}
