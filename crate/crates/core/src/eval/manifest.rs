use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    BrokenRepair,
    UnbrokenEnhancement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeKind {
    Signature,
    InternalLogic,
}

/// One co-evolution sample: a focal-method change and the test that had to follow it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifestEntry {
    pub repo: String,
    pub commit: String,
    pub focal_file: String,
    pub focal_method: String,
    pub test_file: String,
    pub test_method: String,
    pub pre_revision: String,
    pub post_revision: String,
    pub jdk_version: String,
    pub build_tool_version: String,
    pub category: Category,
    pub change_kind: ChangeKind,
    /// Parameter counts, for overloaded methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_arity: Option<usize>,
}

/// Identity of a sample within a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleKey {
    pub repo: String,
    pub commit: String,
    pub test_method: String,
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}#{}", self.repo, self.commit, self.test_method)
    }
}

impl SampleManifestEntry {
    pub fn key(&self) -> SampleKey {
        SampleKey {
            repo: self.repo.clone(),
            commit: self.commit.clone(),
            test_method: self.test_method.clone(),
        }
    }

    fn empty_field(&self) -> Option<&'static str> {
        [
            ("repo", &self.repo),
            ("commit", &self.commit),
            ("focal_file", &self.focal_file),
            ("focal_method", &self.focal_method),
            ("test_file", &self.test_file),
            ("test_method", &self.test_method),
            ("pre_revision", &self.pre_revision),
            ("post_revision", &self.post_revision),
            ("jdk_version", &self.jdk_version),
            ("build_tool_version", &self.build_tool_version),
        ]
        .into_iter()
        .find(|(_, v)| v.trim().is_empty())
        .map(|(k, _)| k)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("cannot read manifest: {0}")]
    Read(String),
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("line {line}: duplicate sample {key} (first on line {first})")]
    Duplicate { line: usize, first: usize, key: String },
}

/// Parses JSON-lines manifest text. Blank lines are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<SampleManifestEntry>, SchemaError> {
    let mut entries = Vec::new();
    let mut seen: HashMap<SampleKey, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let entry: SampleManifestEntry = serde_json::from_str(raw).map_err(|e| SchemaError::Invalid {
            line,
            reason: e.to_string(),
        })?;
        if let Some(field) = entry.empty_field() {
            return Err(SchemaError::Invalid {
                line,
                reason: format!("field `{field}` is empty"),
            });
        }
        if let Some(first) = seen.insert(entry.key(), line) {
            return Err(SchemaError::Duplicate {
                line,
                first,
                key: entry.key().to_string(),
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SampleManifestEntry>, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::Read(format!("{}: {e}", path.display())))?;
    parse_manifest(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn line(test_method: &str) -> String {
        format!(
            r#"{{"repo":"klaw","commit":"abc123","focal_file":"src/main/java/A.java","focal_method":"run","test_file":"src/test/java/ATest.java","test_method":"{test_method}","pre_revision":"p1","post_revision":"p2","jdk_version":"17","build_tool_version":"3.9.6","category":"broken-repair","change_kind":"signature"}}"#
        )
    }

    #[test]
    fn well_formed_lines() {
        let text = [line("a"), String::new(), line("b"), line("c")].join("\n");
        let entries = parse_manifest(&text).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].category, Category::BrokenRepair);
        assert_eq!(entries[2].change_kind, ChangeKind::Signature);
    }

    #[test]
    fn missing_field_names_the_line() {
        let broken = line("b").replace(r#""jdk_version":"17","#, "");
        let err = parse_manifest(&[line("a"), broken].join("\n")).unwrap_err();
        match err {
            SchemaError::Invalid { line, reason } => {
                assert_eq!(line, 2);
                assert!(reason.contains("jdk_version"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicates_and_bad_enums() {
        let err = parse_manifest(&[line("a"), line("b"), line("a")].join("\n")).unwrap_err();
        assert_eq!(
            err,
            SchemaError::Duplicate {
                line: 3,
                first: 1,
                key: "klaw@abc123#a".into()
            }
        );
        let bad = line("a").replace("broken-repair", "rewrite");
        assert!(matches!(parse_manifest(&bad), Err(SchemaError::Invalid { line: 1, .. })));
        let empty = line("a").replace(r#""focal_method":"run""#, r#""focal_method":" ""#);
        assert!(matches!(parse_manifest(&empty), Err(SchemaError::Invalid { line: 1, .. })));
        let extra = line("a").replace('}', r#","notes":"x"}"#);
        assert!(parse_manifest(&extra).is_err());
    }
}
