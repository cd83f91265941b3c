#![allow(dead_code)]

pub mod records;
pub mod skeleton;
pub mod snapshot;
pub mod splice_check;
pub mod texts;

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use testmend_core::build::{BuildOutcome, Diagnostic, TestFailure};
use testmend_core::java::JavaSource;
use testmend_core::llm::{ChatRequest, Completion, FnTransport, Gateway, Role};
use testmend_core::model::{MethodChange, TestTarget};
use testmend_core::workspace::{
    lsp_position, scan_declaration, Declaration, Resolution, SourcePosition, SymbolIndex, SymbolKind,
    SymbolLocation, TextRange, WorkspaceError,
};

pub const FOCAL: &str = "src/main/java/io/klaw/service/TopicControllerService.java";
pub const TEST: &str = "src/test/java/io/klaw/service/TopicControllerServiceTest.java";
pub const TEST_METHOD: &str = "deleteTopicRequests";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn copy_tree(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.unwrap();
        let dest = to.join(entry.path().strip_prefix(from).unwrap());
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest).unwrap();
        } else {
            fs::copy(entry.path(), &dest).unwrap();
        }
    }
}

/// A scratch copy of the klaw fixture with its change and target.
pub struct Sample {
    pub dir: tempfile::TempDir,
    pub change: MethodChange,
    pub target: TestTarget,
    pub test_text: String,
}

impl Sample {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn test_file(&self) -> String {
        fs::read_to_string(self.root().join(TEST)).unwrap()
    }
}

pub fn klaw_sample() -> Sample {
    let dir = tempfile::tempdir().unwrap();
    copy_tree(&fixtures().join("klaw-mini"), dir.path());
    let old = fs::read_to_string(fixtures().join("klaw-mini-pre/TopicControllerService.java")).unwrap();
    let new = fs::read_to_string(dir.path().join(FOCAL)).unwrap();
    let change = MethodChange::from_files(FOCAL, "deleteTopicRequests", None, &old, &new).unwrap();
    let test_text = fs::read_to_string(dir.path().join(TEST)).unwrap();
    let target = TestTarget::locate(TEST, &test_text, TEST_METHOD, Some(0)).unwrap();
    Sample {
        dir,
        change,
        target,
        test_text,
    }
}

pub const GOOD_UPDATE: &str = "Here is the updated test.\n\n```java\n// New import statements\nimport io.klaw.model.OrderBy;\n\n// Updated test methods\n@Test\npublic void deleteTopicRequests() {\n    when(mailService.getUserName()).thenReturn(\"alice\");\n    when(manageDatabase.deleteTopicRequest(1001, \"alice\")).thenReturn(\"success\");\n    String result = service.deleteTopicRequests(TOPIC_ID);\n    assertEquals(\"success\", result);\n}\n```\n";

pub const REPAIRED_UPDATE: &str = "```java\n// Updated test methods\n@Test\npublic void deleteTopicRequests() {\n    when(mailService.getUserName()).thenReturn(\"bob\");\n    when(manageDatabase.deleteTopicRequest(1001, \"bob\")).thenReturn(\"success\");\n    assertEquals(\"success\", service.deleteTopicRequests(TOPIC_ID));\n}\n```\n";

pub const FALLBACK_UPDATE: &str = "```java\n// Updated test methods\n@Test\npublic void deleteTopicRequests() {\n    when(manageDatabase.deleteTopicRequest(1001, null)).thenReturn(\"success\");\n    String result = service.deleteTopicRequests(TOPIC_ID);\n    assertEquals(\"success\", result);\n}\n```\n";

pub const IDENTIFY_REPLY: &str = r#"{"methods": ["getUserName", "deleteTopicRequest"], "classes": ["MailService"]}"#;

pub const FILTER_REPLY: &str =
    r#"{"filtered": [{"id": 1, "code": "public String getUserName() {\n    return \"user\";\n}"}]}"#;

/// Which stage a request belongs to, judged from its first user message.
pub fn stage_of(request: &ChatRequest) -> &'static str {
    let user = request
        .messages
        .iter()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("");
    let last = request.messages.last().map(|m| m.content.as_str()).unwrap_or("");
    if user.starts_with("# Identify") {
        "identify"
    } else if user.starts_with("# Filter") {
        "filter"
    } else if user.starts_with("# Repair") {
        "repair"
    } else if user.starts_with("# Minimal") {
        "fallback"
    } else if last.contains("did not contain the test method") {
        "generate-retry"
    } else {
        "generate"
    }
}

/// A model that answers by stage. Queued replies for a stage are used
/// first; afterwards the default reply for that stage repeats.
#[derive(Clone, Default)]
pub struct ScriptedModel {
    queued: Arc<Mutex<HashMap<&'static str, VecDeque<String>>>>,
    pub seen: Arc<Mutex<Vec<ChatRequest>>>,
}

impl ScriptedModel {
    pub fn queue(&self, stage: &'static str, reply: impl Into<String>) -> &Self {
        self.queued.lock().unwrap().entry(stage).or_default().push_back(reply.into());
        self
    }

    pub fn prompts(&self, stage: &str) -> Vec<String> {
        self.seen
            .lock()
            .unwrap()
            .iter()
            .filter(|r| stage_of(r) == stage)
            .map(|r| r.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n"))
            .collect()
    }

    fn reply(&self, request: &ChatRequest) -> String {
        self.seen.lock().unwrap().push(request.clone());
        let stage = stage_of(request);
        if let Some(r) = self.queued.lock().unwrap().get_mut(stage).and_then(VecDeque::pop_front) {
            return r;
        }
        match stage {
            "identify" => IDENTIFY_REPLY,
            "filter" => FILTER_REPLY,
            "repair" => REPAIRED_UPDATE,
            "fallback" => FALLBACK_UPDATE,
            _ => GOOD_UPDATE,
        }
        .to_owned()
    }

    pub fn gateway_transport(&self) -> FnTransport {
        let model = self.clone();
        FnTransport::new(move |req| {
            let mut c = Completion::text(model.reply(req));
            c.token_usage.prompt = req.full_text().len() as u64 / 4;
            c.token_usage.completion = 50;
            Ok(c)
        })
    }

    pub fn gateway(&self) -> Gateway {
        Gateway::live(self.gateway_transport())
    }
}

/// Resolves names by scanning a fixed set of project files.
pub struct FileIndex {
    pub root: PathBuf,
    pub files: Vec<PathBuf>,
    pub external: Vec<String>,
    pub lookups: Vec<String>,
}

impl FileIndex {
    pub fn klaw(root: &Path) -> Self {
        let files = [
            "src/main/java/io/klaw/service/MailService.java",
            "src/main/java/io/klaw/service/TopicControllerService.java",
            "src/main/java/io/klaw/repo/ManageDatabase.java",
            "src/main/java/io/klaw/model/OrderBy.java",
        ];
        Self {
            root: root.to_owned(),
            files: files.iter().map(PathBuf::from).collect(),
            external: vec!["UserDetails".into()],
            lookups: Vec::new(),
        }
    }
}

impl SymbolIndex for FileIndex {
    fn resolve(&mut self, name: &str, _hint: Option<&SourcePosition>) -> Result<Resolution, WorkspaceError> {
        self.lookups.push(name.to_owned());
        let mut local = Vec::new();
        for file in &self.files {
            let text = fs::read_to_string(self.root.join(file)).unwrap();
            let src = JavaSource::parse(&text);
            for member in src.all_members() {
                if member.name != name {
                    continue;
                }
                let kind = match member.kind {
                    testmend_core::java::MemberKind::Method => SymbolKind::Method,
                    testmend_core::java::MemberKind::Field => SymbolKind::Field,
                    _ => SymbolKind::Class,
                };
                let start = lsp_position(&text, member.name_offset);
                local.push(SymbolLocation {
                    file: file.clone(),
                    range: TextRange { start, end: start },
                    kind,
                });
            }
        }
        let external = local.is_empty() && self.external.iter().any(|e| e == name);
        Ok(Resolution { local, external })
    }

    fn extract(&mut self, symbol: &str, location: &SymbolLocation, cap: usize) -> Result<Declaration, WorkspaceError> {
        scan_declaration(&self.root, symbol, location, cap)
    }

    fn project_root(&self) -> &Path {
        &self.root
    }
}

pub fn missing_symbol(line: u32, symbol: &str) -> BuildOutcome {
    BuildOutcome::compile_failed(vec![Diagnostic {
        file: PathBuf::from("/work").join(TEST),
        line,
        column: Some(9),
        message: format!(
            "cannot find symbol\nsymbol:   class {symbol}\nlocation: class io.klaw.service.TopicControllerServiceTest"
        ),
    }])
}

pub fn assertion_failure(line: u32) -> BuildOutcome {
    BuildOutcome::test_failed(vec![TestFailure {
        test_class: "io.klaw.service.TopicControllerServiceTest".into(),
        test_method: TEST_METHOD.into(),
        message: "expected: <success> but was: <null>".into(),
        failure_type: Some("org.opentest4j.AssertionFailedError".into()),
        expected: Some("success".into()),
        actual: Some("null".into()),
        line: Some(line),
    }])
}
