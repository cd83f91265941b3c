//! Update prompt, reply parsing and splicing into the test file.

use std::fmt::Write as _;
use std::ops::Range;

use log::debug;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::ContextBundle;
use crate::java::{collapse_whitespace, JavaSource, MemberKind};
use crate::llm::{extract_code_payload, ChatMessage};
use crate::model::{InstructionSet, MethodChange, TestTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "attempt")]
pub enum Origin {
    Initial,
    Repair(u32),
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedUpdate {
    pub new_imports: Vec<String>,
    pub updated_method: String,
    pub raw_response: String,
    pub origin: Origin,
}

impl GeneratedUpdate {
    /// The original test, unchanged. Used when the model gives nothing usable.
    pub fn unchanged(target: &TestTarget, origin: Origin) -> Self {
        Self {
            new_imports: Vec::new(),
            updated_method: target.original_source.clone(),
            raw_response: String::new(),
            origin,
        }
    }

    /// Imports followed by the method, in the response-format layout.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.new_imports.is_empty() {
            out.push_str("// New import statements\n");
            for import in &self.new_imports {
                out.push_str(import);
                out.push('\n');
            }
            out.push('\n');
        }
        out.push_str("// Updated test methods\n");
        out.push_str(&self.updated_method);
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("reply contains no method declaration")]
    NoMethodFound,
    #[error("reply renamed the test method to `{found}`")]
    MethodRenamed { found: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpliceError {
    #[error("method span {start}..{end} does not hold the original test method")]
    SpanInvalid { start: usize, end: usize },
}

pub const SYSTEM_ROLE: &str = "You are a Java expert who maintains unit tests. You update test methods so that \
                               they compile, pass, and verify the current behavior of the code under test.";

pub const RESPONSE_FORMAT_EXAMPLE: &str = "```java
// New import statements
import com.example.NewDependency;
import static org.mockito.Mockito.when;

// Updated test methods
@Test
public void testFocalMethod() {
    // Updated test logic here
}
```";

const REPAIR_ENHANCE: [&str; 5] = [
    "Update the test method using the provided context to align with changes in the focal method.",
    "Ensure the updated test correctly validates the new logic.",
    "If the focal method introduces new functionality, generate new test logic accordingly.",
    "For any new parameters, mock the required objects or use default values.",
    "If the core functionality of the focal method remains unchanged, only repair the original test.",
];

const REPAIR_ONLY: [&str; 5] = [
    "Update the test method using the provided context to align with changes in the focal method.",
    "Only repair the original test so that it compiles and passes against the updated focal method.",
    "Do not add new test logic or new assertions.",
    "For any new parameters, mock the required objects or use default values.",
    "Keep the original assertions unless they contradict the updated focal method.",
];

pub(crate) fn push_diff_section(out: &mut String, change: &MethodChange) {
    let _ = write!(
        out,
        "## Focal method change\nFile: `{}`\n```diff\n{}```\n\n",
        change.focal_file.display(),
        change.diff.render()
    );
}

pub(crate) fn push_context_sections(out: &mut String, ctx: &ContextBundle) {
    if !ctx.components.is_empty() {
        out.push_str("## Update related components\n");
        for c in &ctx.components {
            let _ = write!(
                out,
                "### `{}` ({}) from `{}`\n```java\n{}\n```\n\n",
                c.declaration.symbol,
                match c.declaration.kind {
                    crate::workspace::SymbolKind::Method => "method",
                    crate::workspace::SymbolKind::Class => "class",
                    crate::workspace::SymbolKind::Field => "field",
                },
                c.import_path.display(),
                c.filtered_source
            );
        }
    }
    if !ctx.test_class_fields.is_empty() {
        out.push_str(
            "## Test class fields\nThese fields are already declared in the test class. Reuse them instead of \
             declaring new ones.\n```java\n",
        );
        for field in &ctx.test_class_fields.declarations {
            out.push_str(field);
            out.push('\n');
        }
        out.push_str("```\n\n");
    }
}

pub(crate) fn push_imports_section(out: &mut String, imports: &[String]) {
    if imports.is_empty() {
        return;
    }
    out.push_str("## Existing imports of the test file\n```java\n");
    for import in imports {
        out.push_str(import);
        out.push('\n');
    }
    out.push_str("```\n\n");
}

pub(crate) fn push_response_format(out: &mut String, test_method: &str) {
    let _ = write!(
        out,
        "## Response format\nRespond only with Java code. Begin with the new import statements, followed by the \
         updated test method, as in this example:\n{RESPONSE_FORMAT_EXAMPLE}\n\nKeep the method name \
         `{test_method}`.\n"
    );
}

/// The generation prompt: role, inputs, five instructions, import rule and
/// response format.
pub fn build_update_prompt(
    change: &MethodChange,
    target: &TestTarget,
    ctx: &ContextBundle,
    instructions: InstructionSet,
) -> Vec<ChatMessage> {
    let mut user = String::from("# Update a unit test after a focal method change\n\n");
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
    user.push_str("## Instructions\n### Update the original test method\n");
    let steps = match instructions {
        InstructionSet::RepairEnhance => REPAIR_ENHANCE,
        InstructionSet::RepairOnly => REPAIR_ONLY,
    };
    for (i, step) in steps.iter().enumerate() {
        let _ = writeln!(user, "{}. {step}", i + 1);
    }
    user.push_str(
        "\n### Introduce required dependencies\nAdd import statements only for newly introduced dependencies. \
         Do not repeat imports that already exist in the test file.\n\n",
    );
    push_response_format(&mut user, &target.test_method);
    vec![ChatMessage::system(SYSTEM_ROLE), ChatMessage::user(user)]
}

/// Added to the conversation when a reply could not be parsed.
pub fn format_reminder(test_method: &str) -> String {
    format!(
        "Your reply did not contain the test method `{test_method}`. Reply with only Java code in this \
         format:\n{RESPONSE_FORMAT_EXAMPLE}\n"
    )
}

fn import_pattern() -> Regex {
    Regex::new(r"^import\s+(static\s+)?[\p{L}_$][\p{L}\p{N}_$]*(\s*\.\s*([\p{L}_$][\p{L}\p{N}_$]*|\*))*\s*;$")
        .expect("valid regex")
}

/// Extracts imports and the test method from a model reply.
pub fn parse_update_response(content: &str, target: &TestTarget, origin: Origin) -> Result<GeneratedUpdate, ParseError> {
    let code = extract_code_payload(content);
    let src = JavaSource::parse(&code);
    let pattern = import_pattern();
    let existing: Vec<String> = target.existing_imports.iter().map(|i| collapse_whitespace(i)).collect();
    let mut new_imports: Vec<String> = Vec::new();
    for import in src.import_statements() {
        if pattern.is_match(&import) && !existing.contains(&import) && !new_imports.contains(&import) {
            new_imports.push(import);
        }
    }
    let methods: Vec<_> = src
        .all_members()
        .into_iter()
        .filter(|m| m.kind == MemberKind::Method && m.body.is_some())
        .collect();
    let Some(method) = methods.iter().find(|m| m.name == target.test_method) else {
        return Err(match methods.as_slice() {
            [only] => ParseError::MethodRenamed {
                found: only.name.clone(),
            },
            _ => ParseError::NoMethodFound,
        });
    };
    if methods.len() > 1 {
        debug!(
            "reply has {} methods; keeping `{}` and discarding the rest",
            methods.len(),
            target.test_method
        );
    }
    Ok(GeneratedUpdate {
        new_imports,
        updated_method: method.text(&code).to_owned(),
        raw_response: content.to_owned(),
        origin,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spliced {
    pub text: String,
    /// Span of the inserted method in `text`.
    pub method_span: Range<usize>,
    pub inserted_imports: Vec<String>,
}

/// Re-indents `method` so its first line sits at `base` and the rest keep
/// their indentation relative to the least-indented later line.
fn reindent(method: &str, base: &str, eol: &str) -> String {
    let normalized = method.replace("\r\n", "\n");
    let lines: Vec<&str> = normalized.trim_matches('\n').lines().collect();
    let strip = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            out.push_str(eol);
            if line.trim().is_empty() {
                continue;
            }
            out.push_str(base);
            let ws = line.len() - line.trim_start().len();
            out.push_str(&line[ws.min(strip)..]);
        } else {
            out.push_str(line.trim_start());
        }
    }
    out.trim_end().to_owned()
}

/// Replaces the target method with the update and inserts its new imports
/// after the last existing import.
pub fn splice_test_file(file_text: &str, target: &TestTarget, update: &GeneratedUpdate) -> Result<Spliced, SpliceError> {
    let span = target.method_span.clone();
    let invalid = || SpliceError::SpanInvalid {
        start: span.start,
        end: span.end,
    };
    if file_text.get(span.clone()) != Some(target.original_source.as_str()) {
        return Err(invalid());
    }
    let eol = if file_text.contains("\r\n") { "\r\n" } else { "\n" };
    let base = crate::java::indent_at(file_text, span.start);
    let method = reindent(&update.updated_method, base, eol);

    let src = JavaSource::parse(file_text);
    let present = src.import_statements();
    let mut regular = Vec::new();
    let mut statics = Vec::new();
    for import in &update.new_imports {
        let import = collapse_whitespace(import);
        if present.contains(&import) || regular.contains(&import) || statics.contains(&import) {
            continue;
        }
        if import.starts_with("import static ") {
            statics.push(import);
        } else {
            regular.push(import);
        }
    }
    let inserted: Vec<String> = regular.into_iter().chain(statics).collect();

    let (at, block) = if inserted.is_empty() {
        (span.start, String::new())
    } else if let Some(last) = src.imports().last() {
        let mut block = String::new();
        for import in &inserted {
            block.push_str(eol);
            block.push_str(import);
        }
        (last.span.end, block)
    } else if let Some(package) = src.package() {
        let mut block = String::from(eol);
        for import in &inserted {
            block.push_str(eol);
            block.push_str(import);
        }
        (package.span.end, block)
    } else {
        let mut block = String::new();
        for import in &inserted {
            block.push_str(import);
            block.push_str(eol);
        }
        block.push_str(eol);
        (0, block)
    };

    let mut text = String::with_capacity(file_text.len() + block.len() + method.len());
    let method_start;
    if at <= span.start {
        text.push_str(&file_text[..at]);
        text.push_str(&block);
        text.push_str(&file_text[at..span.start]);
        method_start = text.len();
        text.push_str(&method);
        text.push_str(&file_text[span.end..]);
    } else {
        text.push_str(&file_text[..span.start]);
        method_start = text.len();
        text.push_str(&method);
        text.push_str(&file_text[span.end..at]);
        text.push_str(&block);
        text.push_str(&file_text[at..]);
    }
    Ok(Spliced {
        method_span: method_start..method_start + method.len(),
        text,
        inserted_imports: inserted,
    })
}

/// Target describing the method as it sits in a spliced file, so a second
/// splice can build on the first.
pub fn retarget(target: &TestTarget, spliced: &Spliced) -> TestTarget {
    let src = JavaSource::parse(&spliced.text);
    TestTarget {
        original_source: spliced.text[spliced.method_span.clone()].to_owned(),
        method_span: spliced.method_span.clone(),
        existing_imports: src.import_statements(),
        ..target.clone()
    }
}
