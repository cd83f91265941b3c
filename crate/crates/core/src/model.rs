//! Domain types shared by every pipeline stage.

use std::ops::Range;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{compute_unified_diff, UnifiedDiff};
use crate::java::{collapse_whitespace, JavaSource, Member};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("method `{0}` not found")]
    MethodNotFound(String),
    #[error("method `{name}` is ambiguous: {count} overloads match")]
    AmbiguousMethod { name: String, count: usize },
    #[error("no class declaration found in {0}")]
    NoClass(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A focal method before and after a production change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodChange {
    pub focal_file: PathBuf,
    pub method_name: String,
    pub original_source: String,
    pub updated_source: String,
    pub diff: UnifiedDiff,
}

impl MethodChange {
    pub fn new(
        focal_file: impl Into<PathBuf>,
        method_name: impl Into<String>,
        original_source: impl Into<String>,
        updated_source: impl Into<String>,
    ) -> Self {
        let original_source = original_source.into();
        let updated_source = updated_source.into();
        let diff = compute_unified_diff(&original_source, &updated_source);
        Self {
            focal_file: focal_file.into(),
            method_name: method_name.into(),
            original_source,
            updated_source,
            diff,
        }
    }

    /// Extracts the focal method from the old and new versions of its file.
    ///
    /// Overloads are paired by dropping those whose text is identical in
    /// both versions; if that leaves more than one candidate per side,
    /// `arity` (of the updated method) breaks the tie.
    pub fn from_files(
        focal_file: impl Into<PathBuf>,
        method_name: &str,
        arity: Option<usize>,
        old_file: &str,
        new_file: &str,
    ) -> Result<Self, ModelError> {
        let old_src = JavaSource::parse(old_file);
        let new_src = JavaSource::parse(new_file);
        let mut old: Vec<&str> = old_src
            .methods_named(method_name)
            .iter()
            .map(|m| m.text(old_file))
            .collect();
        let mut new: Vec<&str> = new_src
            .methods_named(method_name)
            .iter()
            .map(|m| m.text(new_file))
            .collect();
        if old.is_empty() || new.is_empty() {
            return Err(ModelError::MethodNotFound(method_name.to_owned()));
        }
        if old.len() > 1 || new.len() > 1 {
            let unchanged: Vec<&str> = old.iter().copied().filter(|o| new.contains(o)).collect();
            if unchanged.len() < old.len() && unchanged.len() < new.len() {
                old.retain(|o| !unchanged.contains(o));
                new.retain(|n| !unchanged.contains(n));
            }
        }
        if let Some(arity) = arity {
            let by_arity = |texts: &[&str]| -> Vec<usize> {
                texts
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| method_arity(t) == Some(arity))
                    .map(|(i, _)| i)
                    .collect()
            };
            if new.len() > 1 {
                let keep = by_arity(&new);
                new = keep.into_iter().map(|i| new[i]).collect();
            }
            if old.len() > 1 {
                let keep = by_arity(&old);
                if !keep.is_empty() {
                    old = keep.into_iter().map(|i| old[i]).collect();
                }
            }
        }
        match (old.as_slice(), new.as_slice()) {
            ([o], [n]) => Ok(Self::new(focal_file, method_name, *o, *n)),
            ([], _) | (_, []) => Err(ModelError::MethodNotFound(method_name.to_owned())),
            (o, n) => Err(ModelError::AmbiguousMethod {
                name: method_name.to_owned(),
                count: o.len().max(n.len()),
            }),
        }
    }

    pub fn is_unchanged(&self) -> bool {
        self.diff.is_empty()
    }

    /// Whether the declaration header (modifiers, return type, parameters,
    /// throws clause) differs between the two versions.
    pub fn signature_changed(&self) -> bool {
        signature_of(&self.original_source) != signature_of(&self.updated_source)
    }

    /// Parameter names present in the updated method but not the original.
    pub fn added_parameters(&self) -> Vec<String> {
        let old = parameter_names(&self.original_source);
        parameter_names(&self.updated_source)
            .into_iter()
            .filter(|p| !old.contains(p))
            .collect()
    }
}

fn single_method(text: &str) -> Option<(JavaSource, Member)> {
    let src = JavaSource::parse(text);
    let method = src.methods().first().map(|m| (*m).clone())?;
    Some((src, method))
}

fn method_arity(text: &str) -> Option<usize> {
    single_method(text).and_then(|(_, m)| m.arity)
}

fn signature_of(text: &str) -> String {
    match single_method(text) {
        Some((src, m)) => m.signature(src.text()),
        None => collapse_whitespace(text.split('{').next().unwrap_or_default()),
    }
}

fn parameter_names(text: &str) -> Vec<String> {
    let Some((src, m)) = single_method(text) else {
        return Vec::new();
    };
    let masked = src.masked();
    let Some(open) = (m.name_offset..m.span.end).find(|&i| masked[i] == b'(') else {
        return Vec::new();
    };
    let Some(close) = crate::java::matching_brace(masked, open) else {
        return Vec::new();
    };
    let mut names = Vec::new();
    let mut depth = 0i32;
    let mut start = open + 1;
    for i in open + 1..=close {
        match masked[i] {
            b'<' | b'(' => depth += 1,
            b'>' | b')' if i != close => depth -= 1,
            b',' if depth == 0 => {
                names.extend(last_word(&text[start..i]));
                start = i + 1;
            }
            _ => {}
        }
        if i == close {
            names.extend(last_word(&text[start..i]));
        }
    }
    names
}

fn last_word(s: &str) -> Option<String> {
    s.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .rfind(|w| !w.is_empty())
        .map(str::to_owned)
}

/// The test method to update and where it sits in its file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestTarget {
    pub test_file: PathBuf,
    pub test_class: String,
    pub test_method: String,
    pub original_source: String,
    pub method_span: Range<usize>,
    pub existing_imports: Vec<String>,
}

impl TestTarget {
    /// Locates `test_method` in `file_text`. Overloads are disambiguated by
    /// `arity`; remaining ties are an error.
    pub fn locate(
        test_file: impl Into<PathBuf>,
        file_text: &str,
        test_method: &str,
        arity: Option<usize>,
    ) -> Result<Self, ModelError> {
        let test_file = test_file.into();
        let src = JavaSource::parse(file_text);
        let class = src
            .top_level_type()
            .ok_or_else(|| ModelError::NoClass(test_file.display().to_string()))?;
        let mut candidates = src.methods_named(test_method);
        if let Some(arity) = arity {
            candidates.retain(|m| m.arity == Some(arity));
        }
        let method = match candidates.as_slice() {
            [one] => *one,
            [] => return Err(ModelError::MethodNotFound(test_method.to_owned())),
            many => {
                return Err(ModelError::AmbiguousMethod {
                    name: test_method.to_owned(),
                    count: many.len(),
                })
            }
        };
        let mut existing_imports: Vec<String> = Vec::new();
        for import in src.import_statements() {
            if !existing_imports.contains(&import) {
                existing_imports.push(import);
            }
        }
        Ok(Self {
            test_file,
            test_class: class.name.clone(),
            test_method: test_method.to_owned(),
            original_source: method.text(file_text).to_owned(),
            method_span: method.span.clone(),
            existing_imports,
        })
    }
}

/// Which instruction set the update prompt uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstructionSet {
    #[default]
    RepairEnhance,
    RepairOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub max_repair_attempts: u32,
    pub temperature: f64,
    pub enable_context_collection: bool,
    pub enable_refinement: bool,
    pub build_timeout: Duration,
    pub llm_profile: String,
    pub symbol_cap: usize,
    pub definition_char_cap: usize,
    pub instructions: InstructionSet,
    pub max_output_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_repair_attempts: 2,
            temperature: 0.1,
            enable_context_collection: true,
            enable_refinement: true,
            build_timeout: Duration::from_secs(15 * 60),
            llm_profile: "default".into(),
            symbol_cap: 10,
            definition_char_cap: 4000,
            instructions: InstructionSet::RepairEnhance,
            max_output_tokens: 4096,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ModelError::InvalidConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.symbol_cap == 0 {
            return Err(ModelError::InvalidConfig("symbol_cap must be at least 1".into()));
        }
        if self.definition_char_cap == 0 {
            return Err(ModelError::InvalidConfig(
                "definition_char_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
