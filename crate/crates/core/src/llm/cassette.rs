use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Fingerprint, TokenUsage};

#[derive(Debug, Error)]
pub enum CassetteError {
    #[error("failed to read cassette {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cassette {path} is not valid JSON: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("failed to write cassette {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub content: String,
    pub token_usage: TokenUsage,
    /// Which pipeline step issued the request; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
}

/// Stored responses keyed by request fingerprint. On disk this is a JSON
/// object `{fingerprint: {content, token_usage}}` with sorted keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cassette {
    entries: BTreeMap<Fingerprint, CassetteEntry>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, CassetteError> {
        let text = fs::read_to_string(path).map_err(|source| CassetteError::Read {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CassetteError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    /// Writes atomically: a sibling temp file is renamed over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CassetteError> {
        let write_err = |source| CassetteError::Write {
            path: path.to_owned(),
            source,
        };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(write_err)?;
        let mut json = serde_json::to_string_pretty(self).expect("cassette serializes");
        json.push('\n');
        tmp.write_all(json.as_bytes()).map_err(write_err)?;
        tmp.persist(path).map_err(|e| write_err(e.error))?;
        Ok(())
    }

    pub fn get(&self, fingerprint: &Fingerprint) -> Option<&CassetteEntry> {
        self.entries.get(fingerprint)
    }

    pub fn insert(&mut self, fingerprint: Fingerprint, entry: CassetteEntry) {
        self.entries.insert(fingerprint, entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Fingerprint, &CassetteEntry)> {
        self.entries.iter()
    }
}
