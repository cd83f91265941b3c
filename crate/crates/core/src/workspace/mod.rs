//! Symbol resolution and declaration extraction over the target project.
//!
//! [`WorkspaceSession`] talks to a language server over stdio. Declaration
//! text falls back to the brace-balanced scanner in [`crate::java`] when the
//! server does not report usable ranges, and test-class field collection is
//! purely syntactic so it works without a server.

mod position;
mod session;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::java::{JavaSource, MemberKind};

pub use position::{byte_offset, lsp_position, LineCol, TextRange};
pub use session::{WorkspaceSession, DEFAULT_REQUEST_TIMEOUT};

/// Appended to declarations cut at the character cap.
pub const TRUNCATION_MARKER: &str = "/* …truncated… */";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("failed to start language server `{command}`: {reason}")]
    ServerStartFailure { command: String, reason: String },
    #[error("language server did not answer initialize within {0:?}")]
    HandshakeTimeout(std::time::Duration),
    #[error("request `{method}` timed out twice")]
    RequestTimeout { method: String },
    #[error("language server session is no longer running")]
    SessionDead,
    #[error("language server returned an error for `{method}`: {message}")]
    ServerError { method: String, message: String },
    #[error("failed to read {path}: {source}")]
    FileReadError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no declaration found at {file}:{line}")]
    SpanNotFound { file: PathBuf, line: u32 },
    #[error("no class declaration found in {0}")]
    ParseFailure(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Method,
    Class,
    Field,
}

impl SymbolKind {
    pub fn from_lsp(kind: lsp_types::SymbolKind) -> Option<Self> {
        use lsp_types::SymbolKind as K;
        match kind {
            K::METHOD | K::CONSTRUCTOR | K::FUNCTION => Some(Self::Method),
            K::CLASS | K::INTERFACE | K::ENUM | K::STRUCT => Some(Self::Class),
            K::FIELD | K::VARIABLE | K::CONSTANT | K::PROPERTY | K::ENUM_MEMBER => Some(Self::Field),
            _ => None,
        }
    }

    pub fn to_lsp(self) -> lsp_types::SymbolKind {
        match self {
            Self::Method => lsp_types::SymbolKind::METHOD,
            Self::Class => lsp_types::SymbolKind::CLASS,
            Self::Field => lsp_types::SymbolKind::FIELD,
        }
    }
}

/// A declaration site inside the project. Positions follow the
/// language-server convention: 0-based lines, UTF-16 columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolLocation {
    /// Relative to the project root.
    pub file: PathBuf,
    pub range: TextRange,
    pub kind: SymbolKind,
}

/// A use site handed to definition lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePosition {
    pub file: PathBuf,
    pub position: LineCol,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub symbol: String,
    pub kind: SymbolKind,
    pub source: String,
    pub location: SymbolLocation,
    pub truncated: bool,
}

/// Outcome of a symbol lookup, separating local hits from symbols that
/// only resolve into dependency archives.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolution {
    pub local: Vec<SymbolLocation>,
    pub external: bool,
}

/// What the pipeline needs from a symbol index. [`WorkspaceSession`] is the
/// production implementation.
pub trait SymbolIndex {
    fn resolve(&mut self, name: &str, hint: Option<&SourcePosition>) -> Result<Resolution, WorkspaceError>;

    fn extract(&mut self, symbol: &str, location: &SymbolLocation, cap: usize) -> Result<Declaration, WorkspaceError>;

    fn project_root(&self) -> &Path;
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestClassFields {
    pub declarations: Vec<String>,
}

impl TestClassFields {
    pub fn is_empty(&self) -> bool {
        self.declarations.is_empty()
    }
}

/// Class-level field declarations of the test class in `test_file`.
pub fn collect_test_class_fields(test_file: &Path) -> Result<TestClassFields, WorkspaceError> {
    let text = fs::read_to_string(test_file).map_err(|source| WorkspaceError::FileReadError {
        path: test_file.to_owned(),
        source,
    })?;
    collect_test_class_fields_in(&text).ok_or_else(|| WorkspaceError::ParseFailure(test_file.to_owned()))
}

/// Field declarations of the first top-level class in `text`, or `None`
/// when no class is declared. Nested and anonymous classes are skipped.
pub fn collect_test_class_fields_in(text: &str) -> Option<TestClassFields> {
    let src = JavaSource::parse(text);
    let class = src.top_level_type()?;
    let declarations = class
        .children
        .iter()
        .filter(|m| m.kind == MemberKind::Field)
        .map(|m| m.text(text).to_owned())
        .collect();
    Some(TestClassFields { declarations })
}

/// Cuts `source` to `cap` characters and appends [`TRUNCATION_MARKER`].
pub fn truncate_declaration(source: &str, cap: usize) -> (String, bool) {
    match source.char_indices().nth(cap) {
        Some((cut, _)) => (format!("{}{TRUNCATION_MARKER}", &source[..cut]), true),
        None => (source.to_owned(), false),
    }
}

/// Declaration text around `location` recovered with the source scanner.
pub fn scan_declaration(
    root: &Path,
    symbol: &str,
    location: &SymbolLocation,
    cap: usize,
) -> Result<Declaration, WorkspaceError> {
    let path = root.join(&location.file);
    let text = fs::read_to_string(&path).map_err(|source| WorkspaceError::FileReadError { path, source })?;
    let not_found = || WorkspaceError::SpanNotFound {
        file: location.file.clone(),
        line: location.range.start.line,
    };
    let offset = byte_offset(&text, location.range.start).ok_or_else(not_found)?;
    let src = JavaSource::parse(&text);
    let member = src.innermost_declaration(offset).ok_or_else(not_found)?;
    declaration_from_text(symbol, location, member.text(&text), cap)
}

pub(crate) fn declaration_from_text(
    symbol: &str,
    location: &SymbolLocation,
    raw: &str,
    cap: usize,
) -> Result<Declaration, WorkspaceError> {
    if raw.trim().is_empty() {
        return Err(WorkspaceError::SpanNotFound {
            file: location.file.clone(),
            line: location.range.start.line,
        });
    }
    let (source, truncated) = truncate_declaration(raw, cap);
    Ok(Declaration {
        symbol: symbol.to_owned(),
        kind: location.kind,
        source,
        location: location.clone(),
        truncated,
    })
}
