//! Update-related components and test-class fields for the update prompt.

use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::diff::UnifiedDiff;
use crate::java::{find_word, mask};
use crate::llm::{extract_json_payload, ChatMessage, LlmClient, LlmError};
use crate::model::{MethodChange, PipelineConfig, TestTarget};
use crate::workspace::{
    collect_test_class_fields_in, lsp_position, Declaration, SourcePosition, SymbolIndex, SymbolKind,
    TestClassFields, WorkspaceError,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub declaration: Declaration,
    pub filtered_source: String,
    /// Source file of the declaration, relative to the project root.
    pub import_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// No declaration found in the project.
    Unresolved,
    /// Only found in a dependency archive.
    External,
    /// Beyond the symbol cap.
    Capped,
    /// Not attempted because the language server stopped answering.
    Aborted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub components: Vec<Component>,
    pub test_class_fields: TestClassFields,
    pub dropped_symbols: Vec<(String, DropReason)>,
}

impl ContextBundle {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty() && self.test_class_fields.is_empty()
    }
}

/// Names the model asked for, split into kept and capped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifiedSymbols {
    pub methods: Vec<String>,
    pub classes: Vec<String>,
    pub capped: Vec<String>,
}

impl IdentifiedSymbols {
    pub fn is_empty(&self) -> bool {
        self.methods.is_empty() && self.classes.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("symbol identification failed: {0}")]
    IdentificationFailed(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

const IDENTIFY_SYSTEM: &str = "You are a Java expert who maintains unit tests.";

fn identify_prompt(diff: &UnifiedDiff, original_test: &str, cap: usize) -> Vec<ChatMessage> {
    let user = format!(
        "# Identify update related components\n\n\
         A focal method has changed. Before its unit test is updated, we need the definitions of the \
         methods and classes the updated test will depend on.\n\n\
         ## Focal method diff\n```diff\n{diff}```\n\n\
         ## Original test method\n```java\n{test}\n```\n\n\
         ## Instructions\n\
         Think step by step:\n\
         1. Read the diff and list every method call, constructor, type and field that was added or changed.\n\
         2. Decide which of them the updated test will need to call, mock, construct or import.\n\
         3. Rank them by importance and keep at most {cap}, most important first.\n\n\
         Explain your reasoning briefly, then finish with a JSON object of this form:\n\
         ```json\n{{\"methods\": [\"methodName\"], \"classes\": [\"ClassName\"]}}\n```\n\
         Use simple names without qualifiers or parameter lists.\n",
        diff = diff.render(),
        test = original_test.trim_end(),
    );
    vec![ChatMessage::system(IDENTIFY_SYSTEM), ChatMessage::user(user)]
}

const JSON_REMINDER: &str = "Your reply did not contain the JSON object. Reply with only the JSON object \
                             {\"methods\": [...], \"classes\": [...]}.";

/// Reduces `getUserName()`, `mailService.getUserName` and similar to the
/// bare identifier. `None` for anything that is not one.
fn normalize_name(raw: &str) -> Option<String> {
    let raw = raw.trim();
    let raw = raw.split('(').next().unwrap_or(raw);
    let raw = raw.rsplit(['.', '#']).next().unwrap_or(raw).trim();
    let mut chars = raw.chars();
    let first = chars.next()?;
    let valid = (first.is_alphabetic() || first == '_' || first == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$');
    valid.then(|| raw.to_owned())
}

fn names_at(value: &Value, key: &str) -> Vec<String> {
    value
        .get(key)
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(|v| match v {
                    Value::String(s) => Some(s.as_str()),
                    Value::Object(o) => o.get("name").and_then(Value::as_str),
                    _ => None,
                })
                .filter_map(normalize_name)
                .collect()
        })
        .unwrap_or_default()
}

/// Applies dedup and the combined cap (methods first, then classes).
pub fn cap_symbols(methods: Vec<String>, classes: Vec<String>, cap: usize) -> IdentifiedSymbols {
    let mut out = IdentifiedSymbols::default();
    let mut seen: Vec<String> = Vec::new();
    for (name, is_method) in methods.into_iter().map(|m| (m, true)).chain(classes.into_iter().map(|c| (c, false))) {
        if seen.contains(&name) {
            continue;
        }
        seen.push(name.clone());
        if out.methods.len() + out.classes.len() >= cap {
            out.capped.push(name);
        } else if is_method {
            out.methods.push(name);
        } else {
            out.classes.push(name);
        }
    }
    out
}

/// Asks the model which methods and classes the updated test needs.
pub fn identify_relevant_symbols(
    diff: &UnifiedDiff,
    original_test: &str,
    client: &mut LlmClient<'_>,
    cap: usize,
) -> Result<IdentifiedSymbols, ContextError> {
    if diff.is_empty() {
        return Ok(IdentifiedSymbols::default());
    }
    let mut messages = identify_prompt(diff, original_test, cap);
    let reply = client.send("identify", &client.request(messages.clone()))?;
    let value = match extract_json_payload(&reply.content) {
        Ok(v) => v,
        Err(_) => {
            messages.push(ChatMessage::assistant(reply.content));
            messages.push(ChatMessage::user(JSON_REMINDER));
            let retry = client.send("identify-retry", &client.request(messages))?;
            extract_json_payload(&retry.content)
                .map_err(|e| ContextError::IdentificationFailed(e.to_string()))?
        }
    };
    if !value.is_object() {
        return Err(ContextError::IdentificationFailed("reply is not a JSON object".into()));
    }
    Ok(cap_symbols(names_at(&value, "methods"), names_at(&value, "classes"), cap))
}

fn filter_prompt(raw: &[Declaration], diff: &UnifiedDiff) -> Vec<ChatMessage> {
    let mut user = String::from(
        "# Filter definitions\n\n\
         The definitions below were collected to help update a unit test after the focal method change shown \
         in the diff. Remove members that are irrelevant to the change: unrelated methods, fields and comments. \
         Keep signatures, annotations and bodies of everything the change touches. If a definition is already \
         minimal, return it unchanged.\n\n",
    );
    user.push_str(&format!("## Focal method diff\n```diff\n{}```\n\n## Definitions\n", diff.render()));
    for (i, decl) in raw.iter().enumerate() {
        user.push_str(&format!(
            "### id {} `{}` from `{}`\n```java\n{}\n```\n\n",
            i + 1,
            decl.symbol,
            decl.location.file.display(),
            decl.source
        ));
    }
    user.push_str(
        "## Response format\nReply with only a JSON object, one item per definition:\n\
         ```json\n{\"filtered\": [{\"id\": 1, \"code\": \"...\"}]}\n```\n",
    );
    vec![ChatMessage::system(IDENTIFY_SYSTEM), ChatMessage::user(user)]
}

/// Condensed source for each declaration, in input order. Filtering is
/// best-effort: any item the model drops, mangles or lengthens keeps its
/// raw source.
pub fn filter_definitions(raw: &[Declaration], diff: &UnifiedDiff, client: &mut LlmClient<'_>) -> Vec<String> {
    let mut out: Vec<String> = raw.iter().map(|d| d.source.clone()).collect();
    if raw.is_empty() {
        return out;
    }
    let reply = match client.send("filter", &client.request(filter_prompt(raw, diff))) {
        Ok(r) => r,
        Err(e) => {
            warn!("definition filtering failed, using raw definitions: {e}");
            return out;
        }
    };
    let Ok(value) = extract_json_payload(&reply.content) else {
        warn!("definition filter reply had no JSON, using raw definitions");
        return out;
    };
    let items = value.get("filtered").and_then(Value::as_array).cloned().unwrap_or_default();
    for item in items {
        let Some(id) = item.get("id").and_then(Value::as_u64) else { continue };
        let Some(code) = item.get("code").and_then(Value::as_str) else { continue };
        let Some(slot) = (id as usize).checked_sub(1).and_then(|i| out.get_mut(i)) else {
            continue;
        };
        let code = code.trim();
        if !code.is_empty() && code.chars().count() <= slot.chars().count() {
            *slot = code.to_owned();
        }
    }
    out
}

/// First whole-word use of `name` in `text` at or after `from`.
fn use_site(file: &Path, text: &str, name: &str, from: usize) -> Option<SourcePosition> {
    let masked = mask(text);
    let offset = find_word(&masked, name, from)?;
    Some(SourcePosition {
        file: file.to_owned(),
        position: lsp_position(text, offset),
    })
}

/// Resolution hint: the first use in the updated focal method, else in the
/// original test method.
fn hint_for(
    name: &str,
    change: &MethodChange,
    focal_text: Option<&str>,
    target: &TestTarget,
    test_text: &str,
) -> Option<SourcePosition> {
    if let Some(text) = focal_text {
        if let Some(start) = text.find(&change.updated_source) {
            if let Some(hint) = use_site(&change.focal_file, text, name, start)
                .filter(|h| crate::workspace::byte_offset(text, h.position).is_some_and(|o| o < start + change.updated_source.len()))
            {
                return Some(hint);
            }
        }
    }
    let start = target.method_span.start;
    use_site(&target.test_file, test_text, name, start).filter(|h| {
        crate::workspace::byte_offset(test_text, h.position).is_some_and(|o| o < target.method_span.end)
    })
}

fn aborts_collection(e: &WorkspaceError) -> bool {
    matches!(e, WorkspaceError::RequestTimeout { .. } | WorkspaceError::SessionDead)
}

/// Builds the context bundle for one update. Never fails: every problem
/// degrades to less context.
pub fn collect_context(
    change: &MethodChange,
    target: &TestTarget,
    test_text: &str,
    index: Option<&mut dyn SymbolIndex>,
    client: &mut LlmClient<'_>,
    config: &PipelineConfig,
) -> ContextBundle {
    if !config.enable_context_collection {
        return ContextBundle::default();
    }
    let mut bundle = ContextBundle {
        test_class_fields: collect_test_class_fields_in(test_text).unwrap_or_default(),
        ..ContextBundle::default()
    };
    let Some(index) = index else {
        debug!("no workspace session; context limited to test-class fields");
        return bundle;
    };
    let identified = match identify_relevant_symbols(&change.diff, &target.original_source, client, config.symbol_cap) {
        Ok(ids) => ids,
        Err(e) => {
            warn!("{e}; continuing without update related components");
            return bundle;
        }
    };
    let focal_text = fs::read_to_string(index.project_root().join(&change.focal_file)).ok();

    let wanted = identified
        .methods
        .iter()
        .map(|n| (n, SymbolKind::Method))
        .chain(identified.classes.iter().map(|n| (n, SymbolKind::Class)));
    let mut raw: Vec<Declaration> = Vec::new();
    let mut aborted = false;
    for (name, kind) in wanted {
        if aborted {
            bundle.dropped_symbols.push((name.clone(), DropReason::Aborted));
            continue;
        }
        let hint = hint_for(name, change, focal_text.as_deref(), target, test_text);
        let resolution = match index.resolve(name, hint.as_ref()) {
            Ok(r) => r,
            Err(e) => {
                warn!("resolving {name} failed: {e}");
                aborted = aborts_collection(&e);
                let reason = if aborted { DropReason::Aborted } else { DropReason::Unresolved };
                bundle.dropped_symbols.push((name.clone(), reason));
                continue;
            }
        };
        let Some(location) = resolution
            .local
            .iter()
            .find(|l| l.kind == kind)
            .or_else(|| resolution.local.first())
        else {
            let reason = if resolution.external {
                DropReason::External
            } else {
                DropReason::Unresolved
            };
            debug!("dropping {name}: {reason:?}");
            bundle.dropped_symbols.push((name.clone(), reason));
            continue;
        };
        match index.extract(name, location, config.definition_char_cap) {
            Ok(decl) => raw.push(decl),
            Err(e) => {
                warn!("extracting {name} failed: {e}");
                aborted = aborts_collection(&e);
                let reason = if aborted { DropReason::Aborted } else { DropReason::Unresolved };
                bundle.dropped_symbols.push((name.clone(), reason));
            }
        }
    }
    for name in identified.capped {
        bundle.dropped_symbols.push((name, DropReason::Capped));
    }

    let filtered = filter_definitions(&raw, &change.diff, client);
    bundle.components = raw
        .into_iter()
        .zip(filtered)
        .map(|(declaration, filtered_source)| Component {
            import_path: declaration.location.file.clone(),
            declaration,
            filtered_source,
        })
        .collect();
    bundle
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_normalized() {
        assert_eq!(normalize_name("getUserName()").as_deref(), Some("getUserName"));
        assert_eq!(normalize_name("mailService.getUserName").as_deref(), Some("getUserName"));
        assert_eq!(normalize_name("ManageDatabase#deleteTopicRequest(int, String)").as_deref(), Some("deleteTopicRequest"));
        assert_eq!(normalize_name("  "), None);
        assert_eq!(normalize_name("not a name"), None);
    }

    #[test]
    fn cap_keeps_methods_first_and_dedups() {
        let ids = cap_symbols(
            vec!["a".into(), "b".into(), "a".into()],
            vec!["C".into(), "b".into(), "D".into()],
            3,
        );
        assert_eq!(ids.methods, ["a", "b"]);
        assert_eq!(ids.classes, ["C"]);
        assert_eq!(ids.capped, ["D"]);
    }
}
