//! Text-only replay snapshot: the focal change as a patch, the test file
//! and a cassette with the model replies.

use std::fs;
use std::path::PathBuf;

use testmend_core::build::{BuildOutcome, ScriptedBuilds};
use testmend_core::diff::{apply_diff, UnifiedDiff};
use testmend_core::llm::Gateway;
use testmend_core::model::{MethodChange, PipelineConfig, TestTarget};
use testmend_core::pipeline::{run_pipeline, PipelineRun, UpdateRequest};

use super::{fixtures, missing_symbol, FOCAL, TEST, TEST_METHOD};

pub const MODEL: &str = "fixture-model";

pub fn dir() -> PathBuf {
    fixtures().join("snapshot")
}

pub fn cassette_path() -> PathBuf {
    dir().join("cassette.json")
}

pub fn expected_path() -> PathBuf {
    dir().join("expected/TopicControllerServiceTest.java")
}

pub struct Snapshot {
    pub pre_focal: String,
    pub post_focal: String,
    pub test_text: String,
}

pub fn load() -> Snapshot {
    let pre_focal = fs::read_to_string(dir().join("TopicControllerService.pre.java")).unwrap();
    let patch = UnifiedDiff::parse(&fs::read_to_string(dir().join("focal.diff")).unwrap()).unwrap();
    Snapshot {
        post_focal: apply_diff(&patch, &pre_focal).unwrap(),
        pre_focal,
        test_text: fs::read_to_string(dir().join("TopicControllerServiceTest.java")).unwrap(),
    }
}

/// Compile failure on the first candidate, then a pass.
pub fn compile_then_pass() -> Vec<BuildOutcome> {
    vec![missing_symbol(32, "OrderBy"), BuildOutcome::passed()]
}

pub struct SnapshotRun {
    pub run: PipelineRun,
    pub builds: ScriptedBuilds,
    pub on_disk: String,
}

/// Runs the whole pipeline on the snapshot in a fresh directory.
pub fn run(gateway: &Gateway, config: &PipelineConfig, outcomes: Vec<BuildOutcome>) -> SnapshotRun {
    let snapshot = load();
    let work = tempfile::tempdir().unwrap();
    for (path, text) in [(FOCAL, &snapshot.post_focal), (TEST, &snapshot.test_text)] {
        let path = work.path().join(path);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
    let change = MethodChange::from_files(FOCAL, TEST_METHOD, None, &snapshot.pre_focal, &snapshot.post_focal).unwrap();
    let target = TestTarget::locate(TEST, &snapshot.test_text, TEST_METHOD, None).unwrap();
    let mut builds = ScriptedBuilds::new(outcomes);
    let request = UpdateRequest {
        project_root: work.path(),
        change: &change,
        target: &target,
        test_text: &snapshot.test_text,
    };
    let run = run_pipeline(request, None, &mut builds, gateway, MODEL, config).unwrap();
    let on_disk = fs::read_to_string(work.path().join(TEST)).unwrap();
    SnapshotRun { run, builds, on_disk }
}
