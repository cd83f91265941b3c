use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use lsp_server::{Message, Notification, Request, RequestId, Response};
use lsp_types::{
    DocumentSymbol, DocumentSymbolResponse, GotoDefinitionResponse, Location, OneOf, SymbolInformation,
    WorkspaceSymbolResponse,
};
use serde_json::{json, Value};
use url::Url;

use super::{
    byte_offset, declaration_from_text, lsp_position, scan_declaration, Declaration, LineCol, Resolution,
    SourcePosition, SymbolIndex, SymbolKind, SymbolLocation, TextRange, WorkspaceError,
};

pub const DEFAULT_REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

/// A language server child process bound to one project root.
///
/// Requests are issued one at a time through `&mut self`; responses are
/// matched by id and anything else arriving in between is handled or
/// dropped.
pub struct WorkspaceSession {
    project_root: PathBuf,
    command: String,
    child: Child,
    writer: BufWriter<ChildStdin>,
    incoming: Receiver<Message>,
    next_id: i32,
    capabilities: Value,
    request_timeout: Duration,
    /// Text and version last sent for each opened document.
    opened: HashMap<PathBuf, (String, i32)>,
}

impl std::fmt::Debug for WorkspaceSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkspaceSession")
            .field("project_root", &self.project_root)
            .field("command", &self.command)
            .finish_non_exhaustive()
    }
}

impl WorkspaceSession {
    /// Spawns `server_command` and completes the initialize handshake.
    pub fn open(
        project_root: &Path,
        server_command: &[String],
        request_timeout: Duration,
    ) -> Result<Self, WorkspaceError> {
        let command = server_command.join(" ");
        let start_failure = |reason: String| WorkspaceError::ServerStartFailure {
            command: command.clone(),
            reason,
        };
        let (program, args) = server_command
            .split_first()
            .ok_or_else(|| start_failure("empty command".into()))?;
        let project_root = project_root
            .canonicalize()
            .map_err(|e| start_failure(format!("project root {}: {e}", project_root.display())))?;

        let mut child = Command::new(program)
            .args(args)
            .current_dir(&project_root)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| start_failure(e.to_string()))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");

        let (tx, incoming) = mpsc::channel();
        thread::Builder::new()
            .name("lsp-reader".into())
            .spawn(move || {
                let mut reader = BufReader::new(stdout);
                while let Ok(Some(msg)) = Message::read(&mut reader) {
                    if tx.send(msg).is_err() {
                        break;
                    }
                }
            })
            .map_err(|e| start_failure(e.to_string()))?;

        let mut session = Self {
            project_root,
            command: command.clone(),
            child,
            writer: BufWriter::new(stdin),
            incoming,
            next_id: 0,
            capabilities: Value::Null,
            request_timeout,
            opened: HashMap::new(),
        };

        let root_uri = Url::from_directory_path(&session.project_root)
            .map_err(|_| start_failure("project root is not absolute".into()))?;
        let params = json!({
            "processId": std::process::id(),
            "rootUri": root_uri,
            "rootPath": session.project_root,
            "workspaceFolders": [{ "uri": root_uri, "name": "project" }],
            "capabilities": {
                "textDocument": {
                    "documentSymbol": { "hierarchicalDocumentSymbolSupport": true },
                    "definition": { "linkSupport": true }
                },
                "workspace": { "symbol": {}, "workspaceFolders": true }
            }
        });
        let id = session.send_request("initialize", params)?;
        let result = match session.await_response(&id, "initialize", request_timeout) {
            Ok(value) => value,
            Err(AwaitError::Timeout) => {
                session.kill();
                return Err(WorkspaceError::HandshakeTimeout(request_timeout));
            }
            Err(AwaitError::Dead) => {
                session.kill();
                return Err(start_failure("server exited during initialize".into()));
            }
            Err(AwaitError::Server(message)) => {
                session.kill();
                return Err(start_failure(message));
            }
        };
        session.capabilities = result.get("capabilities").cloned().unwrap_or(Value::Null);
        session.notify("initialized", json!({}))?;
        Ok(session)
    }

    /// Names of the capabilities the server advertised as enabled.
    pub fn capability_set(&self) -> Vec<String> {
        match &self.capabilities {
            Value::Object(map) => map
                .iter()
                .filter(|(_, v)| !matches!(v, Value::Null | Value::Bool(false)))
                .map(|(k, _)| k.clone())
                .collect(),
            _ => Vec::new(),
        }
    }

    fn has_capability(&self, name: &str) -> bool {
        self.capability_set().iter().any(|c| c == name)
    }

    pub fn request_timeout(&self) -> Duration {
        self.request_timeout
    }

    fn send_request(&mut self, method: &str, params: Value) -> Result<RequestId, WorkspaceError> {
        self.next_id += 1;
        let id = RequestId::from(self.next_id);
        self.write(Request::new(id.clone(), method.to_owned(), params).into())?;
        Ok(id)
    }

    fn notify(&mut self, method: &str, params: Value) -> Result<(), WorkspaceError> {
        self.write(Notification::new(method.to_owned(), params).into())
    }

    fn write(&mut self, msg: Message) -> Result<(), WorkspaceError> {
        msg.write(&mut self.writer)
            .and_then(|()| self.writer.flush())
            .map_err(|_| WorkspaceError::SessionDead)
    }

    fn await_response(&mut self, id: &RequestId, method: &str, timeout: Duration) -> Result<Value, AwaitError> {
        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let msg = match self.incoming.recv_timeout(remaining) {
                Ok(msg) => msg,
                Err(RecvTimeoutError::Timeout) => return Err(AwaitError::Timeout),
                Err(RecvTimeoutError::Disconnected) => return Err(AwaitError::Dead),
            };
            match msg {
                Message::Response(resp) if &resp.id == id => {
                    if let Some(err) = resp.error {
                        return Err(AwaitError::Server(err.message));
                    }
                    return Ok(resp.result.unwrap_or(Value::Null));
                }
                Message::Response(resp) => debug!("dropping stale response {:?} while waiting for {method}", resp.id),
                Message::Request(req) => self.answer_server_request(req),
                Message::Notification(_) => {}
            }
        }
    }

    /// Servers may ask for configuration or progress tokens; answer with
    /// empty results so they keep going.
    fn answer_server_request(&mut self, req: Request) {
        let result = match req.method.as_str() {
            "workspace/configuration" => {
                let n = req.params.get("items").and_then(Value::as_array).map_or(0, Vec::len);
                Value::Array(vec![Value::Null; n])
            }
            _ => Value::Null,
        };
        let _ = self.write(Response::new_ok(req.id, result).into());
    }

    /// Sends a request, retrying once on timeout.
    pub fn request(&mut self, method: &str, params: Value) -> Result<Value, WorkspaceError> {
        for attempt in 0..2 {
            let id = self.send_request(method, params.clone())?;
            match self.await_response(&id, method, self.request_timeout) {
                Ok(value) => return Ok(value),
                Err(AwaitError::Timeout) => {
                    warn!("{method} timed out (attempt {})", attempt + 1);
                    let _ = self.notify("$/cancelRequest", json!({ "id": id }));
                }
                Err(AwaitError::Dead) => return Err(WorkspaceError::SessionDead),
                Err(AwaitError::Server(message)) => {
                    return Err(WorkspaceError::ServerError {
                        method: method.to_owned(),
                        message,
                    })
                }
            }
        }
        Err(WorkspaceError::RequestTimeout {
            method: method.to_owned(),
        })
    }

    fn ensure_open(&mut self, relative: &Path) -> Result<Url, WorkspaceError> {
        let absolute = self.project_root.join(relative);
        let uri = Url::from_file_path(&absolute).map_err(|_| WorkspaceError::SpanNotFound {
            file: relative.to_owned(),
            line: 0,
        })?;
        let text = fs::read_to_string(&absolute).map_err(|source| WorkspaceError::FileReadError {
            path: absolute.clone(),
            source,
        })?;
        match self.opened.get_mut(&absolute) {
            None => {
                self.notify(
                    "textDocument/didOpen",
                    json!({ "textDocument": { "uri": uri, "languageId": "java", "version": 1, "text": text } }),
                )?;
                self.opened.insert(absolute, (text, 1));
            }
            // The pipeline rewrites the test file between builds.
            Some((sent, version)) if *sent != text => {
                *version += 1;
                let version = *version;
                *sent = text.clone();
                self.notify(
                    "textDocument/didChange",
                    json!({
                        "textDocument": { "uri": uri, "version": version },
                        "contentChanges": [{ "text": text }]
                    }),
                )?;
            }
            Some(_) => {}
        }
        Ok(uri)
    }

    /// Converts a server location to a project-relative one. `None` for
    /// anything outside the project (dependency archives, JDK sources).
    fn localize(&self, uri: &Url, range: lsp_types::Range, kind: SymbolKind) -> Option<SymbolLocation> {
        if uri.scheme() != "file" {
            return None;
        }
        let path = uri.to_file_path().ok()?;
        let path = path.canonicalize().ok()?;
        let file = path.strip_prefix(&self.project_root).ok()?.to_owned();
        path.is_file().then(|| SymbolLocation {
            file,
            range: range.into(),
            kind,
        })
    }

    /// Locations of `name`'s declarations in the project. A definition
    /// lookup at `hint` takes precedence; otherwise a workspace-wide symbol
    /// query is used.
    pub fn resolve_symbol(
        &mut self,
        name: &str,
        hint: Option<&SourcePosition>,
    ) -> Result<Vec<SymbolLocation>, WorkspaceError> {
        Ok(self.resolve(name, hint)?.local)
    }

    fn definition_at(&mut self, name: &str, hint: &SourcePosition) -> Result<Resolution, WorkspaceError> {
        let uri = self.ensure_open(&hint.file)?;
        let result = self.request(
            "textDocument/definition",
            json!({
                "textDocument": { "uri": uri },
                "position": lsp_types::Position::from(hint.position),
            }),
        )?;
        let locations: Vec<Location> = match serde_json::from_value::<Option<GotoDefinitionResponse>>(result) {
            Ok(Some(GotoDefinitionResponse::Scalar(l))) => vec![l],
            Ok(Some(GotoDefinitionResponse::Array(ls))) => ls,
            Ok(Some(GotoDefinitionResponse::Link(links))) => links
                .into_iter()
                .map(|l| Location::new(l.target_uri, l.target_selection_range))
                .collect(),
            Ok(None) => Vec::new(),
            Err(e) => {
                debug!("unparseable definition response for {name}: {e}");
                Vec::new()
            }
        };
        let mut resolution = Resolution::default();
        for loc in locations {
            let kind = self.kind_at(&loc).unwrap_or(SymbolKind::Method);
            match self.localize(&loc.uri, loc.range, kind) {
                Some(local) => resolution.local.push(local),
                None => resolution.external = true,
            }
        }
        Ok(resolution)
    }

    /// Symbol kind of the declaration at `loc`, from the file's text.
    fn kind_at(&self, loc: &Location) -> Option<SymbolKind> {
        let path = loc.uri.to_file_path().ok()?;
        let text = fs::read_to_string(path).ok()?;
        let offset = byte_offset(&text, loc.range.start.into())?;
        let src = crate::java::JavaSource::parse(&text);
        let member = src.innermost_declaration(offset)?;
        Some(match member.kind {
            crate::java::MemberKind::Type => SymbolKind::Class,
            crate::java::MemberKind::Field => SymbolKind::Field,
            _ => SymbolKind::Method,
        })
    }

    fn workspace_symbol(&mut self, name: &str) -> Result<Resolution, WorkspaceError> {
        let result = self.request("workspace/symbol", json!({ "query": name }))?;
        let matches = |candidate: &str| candidate == name || candidate.starts_with(&format!("{name}("));
        let mut resolution = Resolution::default();
        let mut push = |this: &Self, cand: &str, kind: lsp_types::SymbolKind, uri: &Url, range: lsp_types::Range| {
            if !matches(cand) {
                return;
            }
            let Some(kind) = SymbolKind::from_lsp(kind) else {
                return;
            };
            match this.localize(uri, range, kind) {
                Some(local) => resolution.local.push(local),
                None => resolution.external = true,
            }
        };
        match serde_json::from_value::<Option<WorkspaceSymbolResponse>>(result) {
            Ok(Some(WorkspaceSymbolResponse::Flat(infos))) => {
                for SymbolInformation { name: cand, kind, location, .. } in infos {
                    push(self, &cand, kind, &location.uri, location.range);
                }
            }
            Ok(Some(WorkspaceSymbolResponse::Nested(symbols))) => {
                for sym in symbols {
                    if let OneOf::Left(location) = sym.location {
                        push(self, &sym.name, sym.kind, &location.uri, location.range);
                    }
                }
            }
            Ok(None) => {}
            Err(e) => debug!("unparseable workspace/symbol response for {name}: {e}"),
        }
        Ok(resolution)
    }

    /// Declaration text covering `location`, preferring server-reported
    /// document-symbol ranges over the source scanner.
    pub fn extract_declaration(
        &mut self,
        symbol: &str,
        location: &SymbolLocation,
        cap: usize,
    ) -> Result<Declaration, WorkspaceError> {
        let path = self.project_root.join(&location.file);
        let text = fs::read_to_string(&path).map_err(|source| WorkspaceError::FileReadError {
            path: path.clone(),
            source,
        })?;
        if byte_offset(&text, location.range.start).is_none() {
            return Err(WorkspaceError::SpanNotFound {
                file: location.file.clone(),
                line: location.range.start.line,
            });
        }
        if self.has_capability("documentSymbolProvider") {
            match self.document_symbol_range(&location.file, location.range.start) {
                Ok(Some(range)) => {
                    if let (Some(s), Some(e)) = (byte_offset(&text, range.start), byte_offset(&text, range.end)) {
                        if s < e {
                            return declaration_from_text(symbol, location, &text[s..e], cap);
                        }
                    }
                }
                Ok(None) => {}
                Err(e @ WorkspaceError::SessionDead) => return Err(e),
                Err(e) => debug!("documentSymbol failed, falling back to scanner: {e}"),
            }
        }
        scan_declaration(&self.project_root, symbol, location, cap)
    }

    /// Smallest hierarchical document symbol range containing `pos`.
    fn document_symbol_range(&mut self, file: &Path, pos: LineCol) -> Result<Option<TextRange>, WorkspaceError> {
        let uri = self.ensure_open(file)?;
        let result = self.request("textDocument/documentSymbol", json!({ "textDocument": { "uri": uri } }))?;
        let Ok(Some(DocumentSymbolResponse::Nested(symbols))) =
            serde_json::from_value::<Option<DocumentSymbolResponse>>(result)
        else {
            return Ok(None);
        };
        fn search(symbols: &[DocumentSymbol], pos: LineCol, best: &mut Option<TextRange>) {
            for sym in symbols {
                let range: TextRange = sym.range.into();
                if range.start <= pos && pos < range.end {
                    *best = Some(range);
                    if let Some(children) = &sym.children {
                        search(children, pos, best);
                    }
                }
            }
        }
        let mut best = None;
        search(&symbols, pos, &mut best);
        Ok(best)
    }

    /// Textual references to the symbol at `position`.
    pub fn references(&mut self, position: &SourcePosition) -> Result<Vec<SymbolLocation>, WorkspaceError> {
        let uri = self.ensure_open(&position.file)?;
        let result = self.request(
            "textDocument/references",
            json!({
                "textDocument": { "uri": uri },
                "position": lsp_types::Position::from(position.position),
                "context": { "includeDeclaration": true }
            }),
        )?;
        let locations: Vec<Location> = serde_json::from_value::<Option<Vec<Location>>>(result)
            .ok()
            .flatten()
            .unwrap_or_default();
        Ok(locations
            .into_iter()
            .filter_map(|l| self.localize(&l.uri, l.range, SymbolKind::Method))
            .collect())
    }

    /// Graceful shutdown; the process is killed if it does not exit.
    pub fn shutdown(mut self) -> Result<(), WorkspaceError> {
        let result = self
            .send_request("shutdown", Value::Null)
            .map(|id| self.await_response(&id, "shutdown", Duration::from_secs(5)));
        let _ = self.notify("exit", Value::Null);
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return result.map(|_| ());
            }
            thread::sleep(Duration::from_millis(20));
        }
        self.kill();
        result.map(|_| ())
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Position of the first whole-word occurrence of `word` in `file`
    /// at or after `from` (a byte offset).
    pub fn position_of(&self, file: &Path, word: &str, from: usize) -> Option<SourcePosition> {
        let text = fs::read_to_string(self.project_root.join(file)).ok()?;
        let masked = crate::java::mask(&text);
        let offset = crate::java::find_word(&masked, word, from)?;
        Some(SourcePosition {
            file: file.to_owned(),
            position: lsp_position(&text, offset),
        })
    }
}

enum AwaitError {
    Timeout,
    Dead,
    Server(String),
}

impl SymbolIndex for WorkspaceSession {
    fn resolve(&mut self, name: &str, hint: Option<&SourcePosition>) -> Result<Resolution, WorkspaceError> {
        let mut external = false;
        if let Some(hint) = hint {
            let by_definition = self.definition_at(name, hint)?;
            if !by_definition.local.is_empty() {
                return Ok(by_definition);
            }
            external = by_definition.external;
        }
        let mut by_query = self.workspace_symbol(name)?;
        by_query.external |= external;
        Ok(by_query)
    }

    fn extract(&mut self, symbol: &str, location: &SymbolLocation, cap: usize) -> Result<Declaration, WorkspaceError> {
        self.extract_declaration(symbol, location, cap)
    }

    fn project_root(&self) -> &Path {
        &self.project_root
    }
}

impl Drop for WorkspaceSession {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.notify("exit", Value::Null);
            thread::sleep(Duration::from_millis(10));
            self.kill();
        }
    }
}
