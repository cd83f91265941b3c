//! Validate-repair loop: build, classify, gather targeted context,
//! re-prompt, and fall back to a minimal update once the budget is spent.

mod classify;
mod corpus;
mod repair;

use std::io::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{classify_diagnostic, classify_error, classify_failure, ErrorKind};
pub use corpus::{parse_corpus, CorpusEntry, CorpusError, CorpusInput};
pub use repair::{
    build_fallback_prompt, build_repair_prompt, gather_repair_context, RepairContext, DEFINITION_UNAVAILABLE,
};

use crate::build::{BuildOutcome, BuildRunner, BuildStatus, TestScope};
use crate::context::ContextBundle;
use crate::generate::{parse_update_response, splice_test_file, GeneratedUpdate, Origin, SpliceError};
use crate::java::JavaSource;
use crate::llm::{ChatMessage, Fingerprint, LlmClient, LlmError};
use crate::model::{MethodChange, PipelineConfig, TestTarget};
use crate::workspace::SymbolIndex;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Splice(#[from] SpliceError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One validation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub origin: Origin,
    pub status: BuildStatus,
    pub errors: Vec<ErrorKind>,
    /// Request that produced the candidate, if it came from the model.
    pub prompt_fingerprint: Option<Fingerprint>,
    /// False when the reply was unusable and the previous outcome stands.
    pub build_invoked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementResult {
    pub final_update: GeneratedUpdate,
    pub final_outcome: BuildOutcome,
    pub repair_attempts: u32,
    pub fallback_used: bool,
    pub trace: Vec<TraceStep>,
    pub final_file_text: String,
}

pub struct RefineEnv<'a, 'g> {
    pub project_root: &'a Path,
    /// Test file text before any update.
    pub original_file: &'a str,
    pub target: &'a TestTarget,
    pub change: &'a MethodChange,
    pub context: &'a ContextBundle,
    pub index: Option<&'a mut dyn SymbolIndex>,
    pub builder: &'a mut dyn BuildRunner,
    pub client: &'a mut LlmClient<'g>,
    pub config: &'a PipelineConfig,
}

/// Replaces `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), RefineError> {
    let fail = |source| RefineError::Write {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(text.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn test_scope(target: &TestTarget, file_text: &str) -> TestScope {
    let src = JavaSource::parse(file_text);
    let test_class = match src.package() {
        Some(p) if !p.name.is_empty() => format!("{}.{}", p.name, target.test_class),
        _ => target.test_class.clone(),
    };
    TestScope {
        test_class,
        test_method: target.test_method.clone(),
        test_file: target.test_file.clone(),
    }
}

struct Candidate {
    update: GeneratedUpdate,
    text: String,
    outcome: BuildOutcome,
}

impl RefineEnv<'_, '_> {
    fn validate(&mut self, update: GeneratedUpdate) -> Result<Candidate, RefineError> {
        let spliced = splice_test_file(self.original_file, self.target, &update)?;
        let path = self.project_root.join(&self.target.test_file);
        write_atomic(&path, &spliced.text)?;
        let scope = test_scope(self.target, &spliced.text);
        let outcome = self.builder.run(self.project_root, &scope);
        info!("{:?} build: {:?}", update.origin, outcome.status);
        Ok(Candidate {
            update,
            text: spliced.text,
            outcome,
        })
    }

    fn repair_contexts(&mut self, candidate: &Candidate) -> Vec<RepairContext> {
        let test_file = &self.target.test_file;
        let in_test_file = |file: &Path| {
            file.ends_with(test_file) || (file.is_absolute() && file.file_name() == test_file.file_name())
        };
        let outcome = &candidate.outcome;
        let mut sources: Vec<(ErrorKind, bool)> = outcome
            .diagnostics
            .iter()
            .map(|d| (classify_diagnostic(d), in_test_file(&d.file)))
            .collect();
        sources.extend(outcome.failures.iter().map(|f| (classify_failure(f), true)));
        if sources.is_empty() {
            let message = outcome.detail.clone().unwrap_or_else(|| "the build failed without details".into());
            sources.push(match outcome.status {
                BuildStatus::CompileFailed => (ErrorKind::OtherCompile { message, line: None }, false),
                _ => (ErrorKind::OtherRuntime { message, line: None }, false),
            });
        }
        let mut contexts = Vec::with_capacity(sources.len());
        for (error, local) in sources {
            let text = if local { candidate.text.as_str() } else { "" };
            let index: Option<&mut dyn SymbolIndex> = match &mut self.index {
                Some(i) => Some(&mut **i),
                None => None,
            };
            contexts.push(gather_repair_context(&error, index, text, test_file, self.config.definition_char_cap));
        }
        contexts
    }

    fn ask(&mut self, purpose: &str, messages: Vec<ChatMessage>, origin: Origin) -> Result<Asked, RefineError> {
        let request = self.client.request(messages);
        let fingerprint = request.fingerprint();
        let reply = self.client.send(purpose, &request)?;
        let update = match parse_update_response(&reply.content, self.target, origin) {
            Ok(u) => Some(u),
            Err(e) => {
                warn!("{purpose} reply unusable: {e}");
                None
            }
        };
        Ok(Asked { update, fingerprint })
    }
}

struct Asked {
    update: Option<GeneratedUpdate>,
    fingerprint: Fingerprint,
}

fn step(candidate: &Candidate, fingerprint: Option<Fingerprint>, build_invoked: bool, origin: Origin) -> TraceStep {
    let errors = match candidate.outcome.status {
        BuildStatus::CompileFailed | BuildStatus::TestFailed => classify_error(&candidate.outcome),
        _ => Vec::new(),
    };
    TraceStep {
        origin,
        status: candidate.outcome.status,
        errors,
        prompt_fingerprint: fingerprint,
        build_invoked,
    }
}

fn finished(outcome: &BuildOutcome) -> bool {
    outcome.status == BuildStatus::Passed || outcome.status.is_terminal_error()
}

/// Validates `initial` and repairs it until it passes or the budget runs out.
/// The test file under `env.project_root` holds the last candidate on return.
pub fn refine(
    mut env: RefineEnv<'_, '_>,
    initial: GeneratedUpdate,
    initial_fingerprint: Option<Fingerprint>,
) -> Result<RefinementResult, RefineError> {
    let origin = initial.origin;
    let mut current = env.validate(initial)?;
    let mut trace = vec![step(&current, initial_fingerprint, true, origin)];
    let mut repair_attempts = 0;
    let mut fallback_used = false;

    if env.config.enable_refinement {
        while !finished(&current.outcome) {
            if repair_attempts < env.config.max_repair_attempts {
                repair_attempts += 1;
                let origin = Origin::Repair(repair_attempts);
                let contexts = env.repair_contexts(&current);
                let messages = build_repair_prompt(&contexts, &current.update, env.change, env.target);
                let asked = env.ask("repair", messages, origin)?;
                match asked.update {
                    Some(update) => {
                        current = env.validate(update)?;
                        trace.push(step(&current, Some(asked.fingerprint), true, origin));
                    }
                    None => trace.push(step(&current, Some(asked.fingerprint), false, origin)),
                }
            } else {
                fallback_used = true;
                let messages = build_fallback_prompt(env.change, env.target, env.context);
                let asked = env.ask("fallback", messages, Origin::Fallback)?;
                let update = asked
                    .update
                    .unwrap_or_else(|| GeneratedUpdate::unchanged(env.target, Origin::Fallback));
                current = env.validate(update)?;
                trace.push(step(&current, Some(asked.fingerprint), true, Origin::Fallback));
                break;
            }
        }
    }

    Ok(RefinementResult {
        final_update: current.update,
        final_outcome: current.outcome,
        repair_attempts,
        fallback_used,
        trace,
        final_file_text: current.text,
    })
}
