//! Labeled diagnostics corpus: `### kind: <Label>` blocks holding either a
//! Maven compiler error or an `@test-failure` record.
//!
//! ```text
//! ### kind: MissingSymbol
//! [ERROR] /w/src/test/java/FooTest.java:[42,9] cannot find symbol
//!   symbol:   class OrderBy
//!
//! ### kind: AssertionFailure
//! @test-failure type=org.opentest4j.AssertionFailedError class=io.klaw.FooTest method=m line=57
//! expected: <5> but was: <3>
//! ```

use thiserror::Error;

use super::{classify_diagnostic, classify_failure, ErrorKind};
use crate::build::{extract_expected_actual, parse_diagnostics, Diagnostic, TestFailure};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusInput {
    Diagnostic(Diagnostic),
    Failure(TestFailure),
}

impl CorpusInput {
    pub fn classify(&self) -> ErrorKind {
        match self {
            Self::Diagnostic(d) => classify_diagnostic(d),
            Self::Failure(f) => classify_failure(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub label: String,
    /// 1-based line of the `### kind:` header.
    pub line: usize,
    pub input: CorpusInput,
}

const HEADER: &str = "### kind:";
const FAILURE: &str = "@test-failure";

fn parse_failure(header: &str, body: &str) -> TestFailure {
    let mut failure = TestFailure {
        test_class: String::new(),
        test_method: String::new(),
        message: body.trim().to_owned(),
        failure_type: None,
        expected: None,
        actual: None,
        line: None,
    };
    for pair in header.split_whitespace() {
        let Some((key, value)) = pair.split_once('=') else { continue };
        match key {
            "type" => failure.failure_type = Some(value.to_owned()),
            "class" => failure.test_class = value.to_owned(),
            "method" => failure.test_method = value.to_owned(),
            "line" => failure.line = value.parse().ok(),
            _ => {}
        }
    }
    if let Some((expected, actual)) = extract_expected_actual(&failure.message) {
        failure.expected = Some(expected);
        failure.actual = Some(actual);
    }
    failure
}

fn parse_block(label: &str, line: usize, body: &[&str]) -> Result<CorpusEntry, CorpusError> {
    let malformed = |reason: String| CorpusError::Malformed { line, reason };
    if label.is_empty() {
        return Err(malformed("missing label".into()));
    }
    let first = body.iter().position(|l| !l.trim().is_empty());
    let input = match first.map(|i| (i, body[i].trim_start())) {
        Some((i, l)) if l.starts_with(FAILURE) => {
            let rest = body[i + 1..].join("\n");
            CorpusInput::Failure(parse_failure(&l[FAILURE.len()..], &rest))
        }
        Some(_) => {
            let mut diagnostics = parse_diagnostics(&body.join("\n"));
            if diagnostics.len() != 1 {
                return Err(malformed(format!("expected one compiler error, found {}", diagnostics.len())));
            }
            CorpusInput::Diagnostic(diagnostics.remove(0))
        }
        None => return Err(malformed("empty entry".into())),
    };
    Ok(CorpusEntry {
        label: label.to_owned(),
        line,
        input,
    })
}

/// Parses a corpus file. Text before the first header is ignored.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusEntry>, CorpusError> {
    let mut entries = Vec::new();
    let mut open: Option<(String, usize, Vec<&str>)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if let Some(label) = line.strip_prefix(HEADER) {
            if let Some((label, at, body)) = open.take() {
                entries.push(parse_block(&label, at, &body)?);
            }
            open = Some((label.trim().to_owned(), i + 1, Vec::new()));
        } else if let Some((_, _, body)) = open.as_mut() {
            body.push(line);
        }
    }
    if let Some((label, at, body)) = open {
        entries.push(parse_block(&label, at, &body)?);
    }
    Ok(entries)
}
