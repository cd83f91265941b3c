use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use testmend_core::workspace::{
    lsp_position, SourcePosition, SymbolIndex, SymbolKind, WorkspaceError, WorkspaceSession, TRUNCATION_MARKER,
};

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/klaw-mini")
}

fn server(extra: &[&str]) -> Vec<String> {
    let mut cmd = vec![env!("CARGO_BIN_EXE_mini-java-ls").to_owned()];
    cmd.extend(extra.iter().map(|s| s.to_string()));
    cmd
}

const FOCAL: &str = "src/main/java/io/klaw/service/TopicControllerService.java";
const TEST: &str = "src/test/java/io/klaw/service/TopicControllerServiceTest.java";

fn position_of(file: &str, needle: &str) -> SourcePosition {
    let text = std::fs::read_to_string(fixture_root().join(file)).unwrap();
    let offset = text.find(needle).unwrap();
    SourcePosition {
        file: file.into(),
        position: lsp_position(&text, offset),
    }
}

#[test]
fn session_handshake_reports_capabilities() {
    let session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let caps = session.capability_set();
    assert!(caps.iter().any(|c| c == "definitionProvider"));
    assert!(caps.iter().any(|c| c == "workspaceSymbolProvider"));
    session.shutdown().unwrap();
}

#[test]
fn missing_server_binary_fails_to_start() {
    let err = WorkspaceSession::open(
        &fixture_root(),
        &["/nonexistent/language-server".to_owned()],
        Duration::from_secs(1),
    )
    .unwrap_err();
    assert!(matches!(err, WorkspaceError::ServerStartFailure { .. }), "{err}");
}

#[test]
fn silent_server_times_out_during_handshake() {
    let started = Instant::now();
    let err = WorkspaceSession::open(
        &fixture_root(),
        &["sleep".to_owned(), "30".to_owned()],
        Duration::from_millis(300),
    )
    .unwrap_err();
    assert!(matches!(err, WorkspaceError::HandshakeTimeout(_)), "{err}");
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[test]
fn hint_at_call_site_resolves_local_helper() {
    let mut session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let hint = position_of(FOCAL, "getUserName();");
    let locations = session.resolve_symbol("getUserName", Some(&hint)).unwrap();
    assert_eq!(locations.len(), 1);
    assert_eq!(locations[0].file, Path::new(FOCAL));
    assert_eq!(locations[0].kind, SymbolKind::Method);

    let decl = session.extract("getUserName", &locations[0], 4000).unwrap();
    assert_eq!(
        decl.source,
        "private String getUserName() {\n        return mailService.getUserName();\n    }"
    );
    assert!(!decl.truncated);
}

#[test]
fn workspace_query_without_hint() {
    let mut session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let locations = session.resolve_symbol("OrderBy", None).unwrap();
    assert_eq!(locations.len(), 1);
    assert_eq!(locations[0].kind, SymbolKind::Class);
    assert!(locations[0].file.ends_with("OrderBy.java"));
    let decl = session.extract("OrderBy", &locations[0], 4000).unwrap();
    assert!(decl.source.starts_with("public enum OrderBy {"));
    assert!(decl.source.ends_with('}'));
}

#[test]
fn external_and_unknown_symbols_resolve_to_nothing() {
    let mut session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let hint = position_of(FOCAL, "UserDetails principal");
    let resolution = session.resolve("UserDetails", Some(&hint)).unwrap();
    assert!(resolution.local.is_empty());
    assert!(resolution.external);
    assert!(session.resolve_symbol("UserDetails", Some(&hint)).unwrap().is_empty());
    assert!(session.resolve_symbol("doesNotExistAnywhere", None).unwrap().is_empty());
}

#[test]
fn scanner_fallback_without_document_symbols() {
    let mut session = WorkspaceSession::open(
        &fixture_root(),
        &server(&["--no-document-symbols"]),
        Duration::from_secs(10),
    )
    .unwrap();
    assert!(!session.capability_set().iter().any(|c| c == "documentSymbolProvider"));
    let loc = session.resolve_symbol("deleteTopicRequest", None).unwrap().remove(0);
    let decl = session.extract("deleteTopicRequest", &loc, 4000).unwrap();
    assert_eq!(
        decl.source,
        "public String deleteTopicRequest(int topicId, String userName) {\n        return \"success\";\n    }"
    );
    let decl = session.extract("deleteTopicRequest", &loc, 10).unwrap();
    assert!(decl.truncated);
    assert_eq!(decl.source, format!("public Str{TRUNCATION_MARKER}"));
}

#[test]
fn stale_location_is_span_not_found() {
    let mut session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let mut loc = session.resolve_symbol("OrderBy", None).unwrap().remove(0);
    loc.range.start.line = 500;
    loc.range.end.line = 500;
    let err = session.extract("OrderBy", &loc, 4000).unwrap_err();
    assert!(matches!(err, WorkspaceError::SpanNotFound { .. }), "{err}");
}

#[test]
fn stalled_request_times_out_after_one_retry() {
    let mut session = WorkspaceSession::open(
        &fixture_root(),
        &server(&["--stall", "workspace/symbol"]),
        Duration::from_millis(200),
    )
    .unwrap();
    let started = Instant::now();
    let err = session.resolve_symbol("OrderBy", None).unwrap_err();
    assert!(matches!(err, WorkspaceError::RequestTimeout { .. }), "{err}");
    // Two attempts of 200 ms each.
    assert!(started.elapsed() >= Duration::from_millis(400));
    // The session stays usable for other requests.
    let hint = position_of(FOCAL, "getUserName();");
    assert_eq!(session.resolve_symbol("getUserName", Some(&hint)).unwrap().len(), 1);
}

#[test]
fn hundred_sequential_queries_stay_matched() {
    let mut session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let names = ["OrderBy", "MailService", "ManageDatabase", "countTopics"];
    for i in 0..100 {
        let name = names[i % names.len()];
        let locations = session.resolve_symbol(name, None).unwrap();
        assert_eq!(locations.len(), 1, "query {i} for {name}");
        let text = std::fs::read_to_string(fixture_root().join(&locations[0].file)).unwrap();
        assert!(text.contains(name));
    }
}

#[test]
fn every_location_is_inside_the_project() {
    let mut session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let root = fixture_root().canonicalize().unwrap();
    for name in ["getUserName", "mailService", "OrderBy", "UserDetails", "deleteTopicRequests"] {
        for loc in session.resolve_symbol(name, None).unwrap() {
            assert!(loc.file.is_relative());
            assert!(root.join(&loc.file).is_file());
        }
    }
    let hint = position_of(TEST, "mailService;");
    for loc in session.resolve_symbol("mailService", Some(&hint)).unwrap() {
        assert!(root.join(&loc.file).is_file());
    }
}

#[test]
fn references_cover_test_and_production_code() {
    let mut session = WorkspaceSession::open(&fixture_root(), &server(&[]), Duration::from_secs(10)).unwrap();
    let refs = session.references(&position_of(FOCAL, "deleteTopicRequests(String")).unwrap();
    assert!(refs.iter().any(|l| l.file == Path::new(TEST)));
    assert!(refs.iter().any(|l| l.file == Path::new(FOCAL)));
}
