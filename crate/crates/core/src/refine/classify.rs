use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::build::{BuildOutcome, Diagnostic, TestFailure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ErrorKind {
    MissingSymbol {
        symbol: String,
        line: Option<u32>,
    },
    ArgumentMismatch {
        callee: String,
        line: Option<u32>,
    },
    OtherCompile {
        message: String,
        line: Option<u32>,
    },
    AssertionFailure {
        expected: Option<String>,
        actual: Option<String>,
        line: Option<u32>,
        assertion_source: Option<String>,
    },
    OtherRuntime {
        message: String,
        line: Option<u32>,
    },
}

impl ErrorKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::MissingSymbol { .. } => "MissingSymbol",
            Self::ArgumentMismatch { .. } => "ArgumentMismatch",
            Self::OtherCompile { .. } => "OtherCompile",
            Self::AssertionFailure { .. } => "AssertionFailure",
            Self::OtherRuntime { .. } => "OtherRuntime",
        }
    }

    pub fn line(&self) -> Option<u32> {
        match self {
            Self::MissingSymbol { line, .. }
            | Self::ArgumentMismatch { line, .. }
            | Self::OtherCompile { line, .. }
            | Self::AssertionFailure { line, .. }
            | Self::OtherRuntime { line, .. } => *line,
        }
    }

    pub fn is_compile_error(&self) -> bool {
        matches!(
            self,
            Self::MissingSymbol { .. } | Self::ArgumentMismatch { .. } | Self::OtherCompile { .. }
        )
    }
}

fn symbol_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?m)^\s*symbol\s*:\s*(?:(?:static|class|interface|enum|record|method|variable|constructor|package|type)\s+)*([\w$.]+)",
        )
        .expect("valid regex")
    })
}

fn callee_patterns() -> &'static [Regex] {
    static RE: OnceLock<Vec<Regex>> = OnceLock::new();
    RE.get_or_init(|| {
        [
            r"(?:method|constructor)\s+(?:<[^>]*>\s*)?([\w$]+)\s+in\s+(?:class|interface|enum|record)",
            r"no suitable (?:method|constructor) found for\s+([\w$]+)",
            r"(?:method|constructor)\s+([\w$]+)\s*\(",
        ]
        .iter()
        .map(|p| Regex::new(p).expect("valid regex"))
        .collect()
    })
}

fn is_argument_mismatch(message: &str) -> bool {
    message.contains("cannot be applied to given types")
        || message.contains("no suitable method found")
        || message.contains("no suitable constructor found")
        || (message.contains("cannot be applied to") && (message.contains("method") || message.contains("constructor")))
}

/// Maps one compiler diagnostic to its error kind.
///
/// Precedence on a single message: missing symbol, then argument mismatch,
/// then anything else.
pub fn classify_diagnostic(d: &Diagnostic) -> ErrorKind {
    let line = Some(d.line);
    let first = d.message.lines().next().unwrap_or("");
    if first.contains("cannot find symbol") {
        if let Some(c) = symbol_line().captures(&d.message) {
            let raw = &c[1];
            let symbol = raw.rsplit('.').next().unwrap_or(raw).to_owned();
            return ErrorKind::MissingSymbol { symbol, line };
        }
    }
    if is_argument_mismatch(&d.message) {
        let callee = callee_patterns()
            .iter()
            .find_map(|re| re.captures(first).map(|c| c[1].to_owned()))
            .unwrap_or_default();
        return ErrorKind::ArgumentMismatch { callee, line };
    }
    ErrorKind::OtherCompile {
        message: d.message.clone(),
        line,
    }
}

/// Maps one test failure to its error kind.
pub fn classify_failure(f: &TestFailure) -> ErrorKind {
    let assertion_type = f
        .failure_type
        .as_deref()
        .is_some_and(|t| t.contains("Assert") || t.contains("ComparisonFailure"));
    if f.expected.is_some() || assertion_type {
        ErrorKind::AssertionFailure {
            expected: f.expected.clone(),
            actual: f.actual.clone(),
            line: f.line,
            assertion_source: None,
        }
    } else {
        let message = match &f.failure_type {
            Some(t) if !f.message.contains(t.as_str()) => format!("{t}: {}", f.message),
            _ => f.message.clone(),
        };
        ErrorKind::OtherRuntime { message, line: f.line }
    }
}

/// One kind per diagnostic and per failure, in that order.
pub fn classify_error(outcome: &BuildOutcome) -> Vec<ErrorKind> {
    outcome
        .diagnostics
        .iter()
        .map(classify_diagnostic)
        .chain(outcome.failures.iter().map(classify_failure))
        .collect()
}
