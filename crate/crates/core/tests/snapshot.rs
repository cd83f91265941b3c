mod common;

use std::fs;

use common::snapshot::{self, cassette_path, compile_then_pass, expected_path};
use common::{fixtures, ScriptedModel, FOCAL, TEST};
use testmend_core::build::BuildOutcome;
use testmend_core::diff::compute_unified_diff;
use testmend_core::llm::Gateway;
use testmend_core::model::PipelineConfig;

/// Rebuilds the snapshot from the klaw fixture and records its cassette.
/// Run with `cargo test --test snapshot -- --ignored` after changing prompts.
#[test]
#[ignore]
fn regenerate_snapshot() {
    let dir = snapshot::dir();
    fs::create_dir_all(dir.join("expected")).unwrap();
    let pre = fs::read_to_string(fixtures().join("klaw-mini-pre/TopicControllerService.java")).unwrap();
    let post = fs::read_to_string(fixtures().join("klaw-mini").join(FOCAL)).unwrap();
    let patch = compute_unified_diff(&pre, &post).render_patch(&format!("a/{FOCAL}"), &format!("b/{FOCAL}"));
    fs::write(dir.join("TopicControllerService.pre.java"), &pre).unwrap();
    fs::write(dir.join("focal.diff"), patch).unwrap();
    fs::copy(fixtures().join("klaw-mini").join(TEST), dir.join("TopicControllerServiceTest.java")).unwrap();
    let _ = fs::remove_file(cassette_path());

    let model = ScriptedModel::default();
    let gateway = Gateway::record(model.gateway_transport(), Some(&cassette_path())).unwrap();
    let full = snapshot::run(&gateway, &PipelineConfig::default(), compile_then_pass());
    fs::write(expected_path(), &full.run.refinement.final_file_text).unwrap();
    let naive = PipelineConfig {
        enable_context_collection: false,
        enable_refinement: false,
        ..PipelineConfig::default()
    };
    snapshot::run(&gateway, &naive, vec![BuildOutcome::passed()]);
    assert_eq!(gateway.cassette().len(), 3);
}

#[test]
fn committed_cassette_reproduces_the_expected_file() {
    let gateway = Gateway::replay_file(&cassette_path()).unwrap();
    let run = snapshot::run(&gateway, &PipelineConfig::default(), compile_then_pass());
    let expected = fs::read_to_string(expected_path()).unwrap();
    assert_eq!(run.on_disk, expected);
    assert_eq!(run.run.refinement.final_file_text, expected);
    assert_eq!(run.run.refinement.repair_attempts, 1);
    assert_eq!(run.run.llm_calls(), 2);
}
