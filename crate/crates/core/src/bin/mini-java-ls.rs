//! A small stdio language server for Java projects.
//!
//! It indexes `*.java` files with the crate's source scanner and answers
//! definition, workspace-symbol, document-symbol and references requests.
//! Resolution is name-based with a few scoping heuristics; it exists so the
//! pipeline can run without a JVM toolchain and as a test double.
//!
//! Flags:
//!   --no-document-symbols   do not advertise documentSymbolProvider
//!   --stall METHOD          never answer requests for METHOD

use std::collections::HashMap;
use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};

use lsp_server::{Connection, Message, Request, Response};
use lsp_types::{
    DocumentSymbol, Location, Position, Range, SymbolInformation, SymbolKind, Url,
};
use regex::Regex;
use serde_json::{json, Value};
use testmend_core::java::{find_word, is_ident_byte, mask, JavaSource, Member, MemberKind};
use testmend_core::workspace::lsp_position;
use walkdir::WalkDir;

struct Entry {
    name: String,
    kind: SymbolKind,
    uri: Url,
    selection: Range,
}

struct Server {
    root: PathBuf,
    entries: Vec<Entry>,
    open_docs: HashMap<Url, String>,
}

fn range_of(text: &str, start: usize, end: usize) -> Range {
    Range::new(lsp_position(text, start).into(), lsp_position(text, end).into())
}

fn kind_of(member: &Member) -> Option<SymbolKind> {
    match member.kind {
        MemberKind::Type => Some(SymbolKind::CLASS),
        MemberKind::Method => Some(SymbolKind::METHOD),
        MemberKind::Field => Some(SymbolKind::FIELD),
        _ => None,
    }
}

impl Server {
    fn new(root: PathBuf) -> Self {
        let mut server = Self {
            root,
            entries: Vec::new(),
            open_docs: HashMap::new(),
        };
        server.index();
        server
    }

    fn java_files(&self) -> Vec<PathBuf> {
        WalkDir::new(&self.root)
            .into_iter()
            .filter_entry(|e| e.file_name() != "target" && e.file_name() != ".git")
            .filter_map(Result::ok)
            .filter(|e| e.path().extension().is_some_and(|x| x == "java"))
            .map(|e| e.into_path())
            .collect()
    }

    fn index(&mut self) {
        for path in self.java_files() {
            let Ok(text) = fs::read_to_string(&path) else { continue };
            let Ok(uri) = Url::from_file_path(&path) else { continue };
            let src = JavaSource::parse(&text);
            for member in src.all_members() {
                let Some(kind) = kind_of(member) else { continue };
                if member.name.is_empty() {
                    continue;
                }
                self.entries.push(Entry {
                    name: member.name.clone(),
                    kind,
                    uri: uri.clone(),
                    selection: range_of(&text, member.name_offset, member.name_offset + member.name.len()),
                });
            }
        }
    }

    fn text_of(&self, uri: &Url) -> Option<String> {
        if let Some(text) = self.open_docs.get(uri) {
            return Some(text.clone());
        }
        fs::read_to_string(uri.to_file_path().ok()?).ok()
    }

    fn definition(&self, uri: &Url, pos: Position) -> Vec<Location> {
        let Some(text) = self.text_of(uri) else { return Vec::new() };
        let Some(offset) = testmend_core::workspace::byte_offset(&text, pos.into()) else {
            return Vec::new();
        };
        let masked = mask(&text);
        let (start, end) = word_bounds(&masked, offset);
        if start == end {
            return Vec::new();
        }
        let word = &text[start..end];
        let qualifier = qualifier_before(&masked, &text, start);

        let mut candidates: Vec<&Entry> = self.entries.iter().filter(|e| e.name == word).collect();
        if let Some(qualifier) = qualifier {
            // `field.member`: narrow to files declaring the field's type.
            if let Some(ty) = declared_type(&text, &qualifier) {
                let owners: Vec<&Url> = self
                    .entries
                    .iter()
                    .filter(|e| e.kind == SymbolKind::CLASS && e.name == ty)
                    .map(|e| &e.uri)
                    .collect();
                let narrowed: Vec<&Entry> = candidates.iter().copied().filter(|e| owners.contains(&&e.uri)).collect();
                if !narrowed.is_empty() {
                    candidates = narrowed;
                }
            }
        } else {
            let same_file: Vec<&Entry> = candidates.iter().copied().filter(|e| &e.uri == uri).collect();
            if !same_file.is_empty() {
                candidates = same_file;
            }
        }
        if !candidates.is_empty() {
            return candidates
                .into_iter()
                .map(|e| Location::new(e.uri.clone(), e.selection))
                .collect();
        }
        // Imported but not indexed: report a location inside a dependency archive.
        let import = Regex::new(r"(?m)^\s*import\s+(?:static\s+)?([\w.]+)\s*;").expect("valid regex");
        for cap in import.captures_iter(&text) {
            let path = &cap[1];
            if path.rsplit('.').next() == Some(word) {
                let class_path = path.replace('.', "/");
                if let Ok(uri) = Url::parse(&format!("jar:file:///m2/repository/dependency.jar!/{class_path}.class")) {
                    return vec![Location::new(uri, Range::default())];
                }
            }
        }
        Vec::new()
    }

    fn workspace_symbol(&self, query: &str) -> Vec<SymbolInformation> {
        #[allow(deprecated)]
        self.entries
            .iter()
            .filter(|e| e.name.contains(query))
            .map(|e| SymbolInformation {
                name: if e.kind == SymbolKind::METHOD {
                    format!("{}()", e.name)
                } else {
                    e.name.clone()
                },
                kind: e.kind,
                tags: None,
                deprecated: None,
                location: Location::new(e.uri.clone(), e.selection),
                container_name: None,
            })
            .collect()
    }

    fn document_symbols(&self, uri: &Url) -> Vec<DocumentSymbol> {
        let Some(text) = self.text_of(uri) else { return Vec::new() };
        let src = JavaSource::parse(&text);
        #[allow(deprecated)]
        fn convert(text: &str, members: &[Member]) -> Vec<DocumentSymbol> {
            members
                .iter()
                .filter_map(|m| {
                    let kind = kind_of(m)?;
                    Some(DocumentSymbol {
                        name: m.name.clone(),
                        detail: None,
                        kind,
                        tags: None,
                        deprecated: None,
                        range: range_of(text, m.span.start, m.span.end),
                        selection_range: range_of(text, m.name_offset, m.name_offset + m.name.len()),
                        children: Some(convert(text, &m.children)),
                    })
                })
                .collect()
        }
        convert(&text, &src.members)
    }

    fn references(&self, uri: &Url, pos: Position) -> Vec<Location> {
        let Some(text) = self.text_of(uri) else { return Vec::new() };
        let Some(offset) = testmend_core::workspace::byte_offset(&text, pos.into()) else {
            return Vec::new();
        };
        let masked = mask(&text);
        let (start, end) = word_bounds(&masked, offset);
        if start == end {
            return Vec::new();
        }
        let word = text[start..end].to_owned();
        let mut out = Vec::new();
        for path in self.java_files() {
            let Ok(body) = fs::read_to_string(&path) else { continue };
            let Ok(file_uri) = Url::from_file_path(&path) else { continue };
            let masked = mask(&body);
            let mut from = 0;
            while let Some(hit) = find_word(&masked, &word, from) {
                out.push(Location::new(file_uri.clone(), range_of(&body, hit, hit + word.len())));
                from = hit + word.len();
            }
        }
        out
    }
}

fn word_bounds(masked: &[u8], offset: usize) -> (usize, usize) {
    let mut start = offset.min(masked.len());
    while start > 0 && is_ident_byte(masked[start - 1]) {
        start -= 1;
    }
    let mut end = offset.min(masked.len());
    while end < masked.len() && is_ident_byte(masked[end]) {
        end += 1;
    }
    (start, end)
}

fn qualifier_before(masked: &[u8], text: &str, start: usize) -> Option<String> {
    let mut i = start;
    while i > 0 && masked[i - 1].is_ascii_whitespace() {
        i -= 1;
    }
    if i == 0 || masked[i - 1] != b'.' {
        return None;
    }
    let (qs, qe) = word_bounds(masked, i - 1);
    let (qs, qe) = if qe <= qs {
        let mut e = i - 1;
        while e > 0 && masked[e - 1].is_ascii_whitespace() {
            e -= 1;
        }
        word_bounds(masked, e.saturating_sub(1))
    } else {
        (qs, qe)
    };
    (qs < qe).then(|| text[qs..qe].to_owned())
}

fn declared_type(text: &str, variable: &str) -> Option<String> {
    let pattern = format!(r"([A-Z]\w*)(?:<[^;=()]*>)?\s+{}\s*[;=,)]", regex::escape(variable));
    Regex::new(&pattern).ok()?.captures(text).map(|c| c[1].to_owned())
}

fn params<T: serde::de::DeserializeOwned>(req: &Request) -> Option<T> {
    serde_json::from_value(req.params.clone()).ok()
}

fn main() -> Result<(), Box<dyn Error + Sync + Send>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let document_symbols = !args.iter().any(|a| a == "--no-document-symbols");
    let stalled: Vec<String> = args
        .windows(2)
        .filter(|w| w[0] == "--stall")
        .map(|w| w[1].clone())
        .collect();

    let (connection, io_threads) = Connection::stdio();
    let (id, init) = connection.initialize_start()?;
    let root = init
        .get("rootUri")
        .and_then(Value::as_str)
        .and_then(|u| Url::parse(u).ok())
        .and_then(|u| u.to_file_path().ok())
        .or_else(|| std::env::current_dir().ok())
        .unwrap_or_else(|| Path::new(".").to_owned());
    let mut server = Server::new(root);
    connection.initialize_finish(
        id,
        json!({
            "capabilities": {
                "definitionProvider": true,
                "workspaceSymbolProvider": true,
                "documentSymbolProvider": document_symbols,
                "referencesProvider": true,
                "textDocumentSync": 1
            },
            "serverInfo": { "name": "mini-java-ls", "version": env!("CARGO_PKG_VERSION") }
        }),
    )?;

    for msg in &connection.receiver {
        match msg {
            Message::Request(req) => {
                if connection.handle_shutdown(&req)? {
                    break;
                }
                if stalled.contains(&req.method) {
                    continue;
                }
                let result = match req.method.as_str() {
                    "textDocument/definition" => params::<lsp_types::GotoDefinitionParams>(&req)
                        .map(|p| {
                            let tdp = p.text_document_position_params;
                            json!(server.definition(&tdp.text_document.uri, tdp.position))
                        })
                        .unwrap_or(Value::Null),
                    "workspace/symbol" => params::<lsp_types::WorkspaceSymbolParams>(&req)
                        .map(|p| json!(server.workspace_symbol(&p.query)))
                        .unwrap_or(Value::Null),
                    "textDocument/documentSymbol" => params::<lsp_types::DocumentSymbolParams>(&req)
                        .map(|p| json!(server.document_symbols(&p.text_document.uri)))
                        .unwrap_or(Value::Null),
                    "textDocument/references" => params::<lsp_types::ReferenceParams>(&req)
                        .map(|p| {
                            let tdp = p.text_document_position;
                            json!(server.references(&tdp.text_document.uri, tdp.position))
                        })
                        .unwrap_or(Value::Null),
                    _ => {
                        connection.sender.send(
                            Response::new_err(req.id, lsp_server::ErrorCode::MethodNotFound as i32, req.method).into(),
                        )?;
                        continue;
                    }
                };
                connection.sender.send(Response::new_ok(req.id, result).into())?;
            }
            Message::Notification(note) => {
                if note.method == "textDocument/didOpen" {
                    if let Ok(p) = serde_json::from_value::<lsp_types::DidOpenTextDocumentParams>(note.params) {
                        server.open_docs.insert(p.text_document.uri, p.text_document.text);
                    }
                } else if note.method == "textDocument/didChange" {
                    if let Ok(p) = serde_json::from_value::<lsp_types::DidChangeTextDocumentParams>(note.params) {
                        if let Some(change) = p.content_changes.into_iter().last() {
                            server.open_docs.insert(p.text_document.uri, change.text);
                        }
                    }
                } else if note.method == "exit" {
                    break;
                }
            }
            Message::Response(_) => {}
        }
    }
    drop(connection);
    // The stdin reader may still be blocked; exiting ends it.
    drop(io_threads);
    Ok(())
}
