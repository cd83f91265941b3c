//! Hand-built evaluation records.

use testmend_core::build::{BuildOutcome, ClassCoverage, Counter};
use testmend_core::eval::{Category, ChangeKind, RunRecord, SampleManifestEntry};
use testmend_core::generate::{GeneratedUpdate, Origin};
use testmend_core::llm::TokenUsage;
use testmend_core::refine::RefinementResult;

use super::{FOCAL, TEST};

pub fn entry(test_method: &str) -> SampleManifestEntry {
    SampleManifestEntry {
        repo: "klaw".into(),
        commit: "c0ffee".into(),
        focal_file: FOCAL.into(),
        focal_method: "deleteTopicRequests".into(),
        test_file: TEST.into(),
        test_method: test_method.into(),
        pre_revision: "pre".into(),
        post_revision: "post".into(),
        jdk_version: "17".into(),
        build_tool_version: "3.9.6".into(),
        category: Category::BrokenRepair,
        change_kind: ChangeKind::InternalLogic,
        focal_arity: None,
        test_arity: None,
    }
}

pub fn record(name: &str, compiled: bool, passed: bool, branch: Option<(u64, u64)>, line: (u64, u64)) -> RunRecord {
    let coverage = compiled.then(|| ClassCoverage {
        branch: branch.map(|(covered, missed)| Counter { covered, missed }),
        line: Some(Counter {
            covered: line.0,
            missed: line.1,
        }),
        source_file: None,
    });
    RunRecord {
        entry: entry(name),
        result: RefinementResult {
            final_update: GeneratedUpdate {
                new_imports: vec![],
                updated_method: String::new(),
                raw_response: String::new(),
                origin: Origin::Initial,
            },
            final_outcome: BuildOutcome::passed(),
            repair_attempts: 0,
            fallback_used: false,
            trace: vec![],
            final_file_text: String::new(),
        },
        compiled,
        passed,
        coverage,
        llm_calls: 3,
        calls: vec![],
        tokens: TokenUsage::default(),
        wall_time: 1.0,
    }
}
