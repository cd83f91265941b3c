//! Context collection, generation and refinement for one test update.

use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::build::BuildRunner;
use crate::context::{collect_context, ContextBundle};
use crate::generate::{build_update_prompt, format_reminder, parse_update_response, GeneratedUpdate, Origin};
use crate::llm::{CallRecord, ChatMessage, Fingerprint, Gateway, LlmClient, LlmError, TokenUsage};
use crate::model::{MethodChange, PipelineConfig, TestTarget};
use crate::refine::{refine, RefineEnv, RefineError, RefinementResult};
use crate::workspace::SymbolIndex;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("generation failed: {0}")]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// Everything one update needs besides its collaborators.
#[derive(Debug, Clone, Copy)]
pub struct UpdateRequest<'a> {
    pub project_root: &'a Path,
    pub change: &'a MethodChange,
    pub target: &'a TestTarget,
    /// Test file text before the update.
    pub test_text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub context: ContextBundle,
    pub refinement: RefinementResult,
    pub calls: Vec<CallRecord>,
    pub token_usage: TokenUsage,
}

impl PipelineRun {
    pub fn llm_calls(&self) -> usize {
        self.calls.len()
    }
}

/// Asks for the initial update; one format reminder if the reply has no
/// usable method, then the original test is kept.
fn generate(
    client: &mut LlmClient<'_>,
    request: &UpdateRequest<'_>,
    context: &ContextBundle,
    config: &PipelineConfig,
) -> Result<(GeneratedUpdate, Fingerprint), LlmError> {
    let messages = build_update_prompt(request.change, request.target, context, config.instructions);
    let first = client.request(messages.clone());
    let reply = client.send("generate", &first)?;
    let error = match parse_update_response(&reply.content, request.target, Origin::Initial) {
        Ok(update) => return Ok((update, first.fingerprint())),
        Err(e) => e,
    };
    warn!("generation reply unusable ({error}); re-prompting with the format");
    let mut retry_messages = messages;
    retry_messages.push(ChatMessage::assistant(reply.content));
    retry_messages.push(ChatMessage::user(format_reminder(&request.target.test_method)));
    let retry = client.request(retry_messages);
    let reply = client.send("generate-retry", &retry)?;
    let update = parse_update_response(&reply.content, request.target, Origin::Initial).unwrap_or_else(|e| {
        warn!("second reply unusable ({e}); keeping the original test");
        GeneratedUpdate::unchanged(request.target, Origin::Initial)
    });
    Ok((update, retry.fingerprint()))
}

/// Runs the whole update and leaves the final candidate in the test file.
pub fn run_pipeline(
    request: UpdateRequest<'_>,
    mut index: Option<&mut dyn SymbolIndex>,
    builder: &mut dyn BuildRunner,
    gateway: &Gateway,
    model_id: &str,
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    let mut client = LlmClient::new(gateway, model_id, config.temperature, config.max_output_tokens);
    let context = collect_context(
        request.change,
        request.target,
        request.test_text,
        match &mut index {
            Some(i) => Some(&mut **i),
            None => None,
        },
        &mut client,
        config,
    );
    info!(
        "context: {} components, {} fields, {} dropped",
        context.components.len(),
        context.test_class_fields.declarations.len(),
        context.dropped_symbols.len()
    );
    let (initial, fingerprint) = generate(&mut client, &request, &context, config)?;
    let index: Option<&mut dyn SymbolIndex> = match index {
        Some(i) => Some(&mut *i),
        None => None,
    };
    let env = RefineEnv {
        project_root: request.project_root,
        original_file: request.test_text,
        target: request.target,
        change: request.change,
        context: &context,
        index,
        builder: &mut *builder,
        client: &mut client,
        config,
    };
    let refinement = refine(env, initial, Some(fingerprint))?;
    Ok(PipelineRun {
        context,
        refinement,
        calls: client.calls().to_vec(),
        token_usage: client.token_usage(),
    })
}
