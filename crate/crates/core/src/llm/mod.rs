//! Provider-neutral chat completion with record/replay cassettes.

mod cassette;
mod extract;
mod transport;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::{Cassette, CassetteEntry, CassetteError};
pub use extract::{extract_code_payload, extract_json_payload, NoJsonFound};
pub use transport::{Completion, FnTransport, HttpTransport, LlmProfile, Transport, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub model_id: String,
    pub temperature: f64,
    pub max_output: u32,
}

impl ChatRequest {
    /// Stable hex SHA-256 over messages, model id and temperature.
    pub fn fingerprint(&self) -> Fingerprint {
        #[derive(Serialize)]
        struct Key<'a> {
            messages: &'a [ChatMessage],
            model_id: &'a str,
            temperature: f64,
        }
        let key = serde_json::to_vec(&Key {
            messages: &self.messages,
            model_id: &self.model_id,
            temperature: self.temperature,
        })
        .expect("request key serializes");
        Fingerprint(hex::encode(Sha256::digest(&key)))
    }

    fn validate(&self) -> Result<(), LlmError> {
        match self.messages.first() {
            None => Err(LlmError::InvalidRequest("no messages".into())),
            Some(m) if m.role == Role::Assistant => {
                Err(LlmError::InvalidRequest("first message must be system or user".into()))
            }
            Some(_) => Ok(()),
        }
    }

    /// All message contents, for assertions and logs.
    pub fn full_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(pub String);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt + self.completion
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt += rhs.prompt;
        self.completion += rhs.completion;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub token_usage: TokenUsage,
    pub latency: Duration,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no cassette entry for request fingerprint {0}")]
    CassetteMiss(Fingerprint),
    #[error("provider error: {0}")]
    ProviderError(String),
    #[error("model output was truncated at the token limit")]
    OutputTruncated,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Cassette(#[from] CassetteError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    Replay,
    Record,
}

/// Chat-completion entry point shared by all pipeline stages.
///
/// Safe for concurrent use: cassette reads take a shared lock and
/// record-mode appends an exclusive one.
pub struct Gateway {
    mode: BackendMode,
    transport: Option<Box<dyn Transport>>,
    cassette: RwLock<Cassette>,
    cassette_path: Option<PathBuf>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.mode)
            .field("cassette_path", &self.cassette_path)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn live(transport: impl Transport + 'static) -> Self {
        Self {
            mode: BackendMode::Live,
            transport: Some(Box::new(transport)),
            cassette: RwLock::new(Cassette::default()),
            cassette_path: None,
        }
    }

    pub fn replay(cassette: Cassette) -> Self {
        Self {
            mode: BackendMode::Replay,
            transport: None,
            cassette: RwLock::new(cassette),
            cassette_path: None,
        }
    }

    pub fn replay_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::replay(Cassette::load(path)?))
    }

    /// Records into `path`, extending the cassette if it already exists.
    /// With `path` = `None` the cassette is kept in memory only.
    pub fn record(transport: impl Transport + 'static, path: Option<&Path>) -> Result<Self, LlmError> {
        let cassette = match path {
            Some(p) if p.exists() => Cassette::load(p)?,
            _ => Cassette::default(),
        };
        Ok(Self {
            mode: BackendMode::Record,
            transport: Some(Box::new(transport)),
            cassette: RwLock::new(cassette),
            cassette_path: path.map(Path::to_owned),
        })
    }

    pub fn mode(&self) -> BackendMode {
        self.mode
    }

    /// Snapshot of the current cassette contents.
    pub fn cassette(&self) -> Cassette {
        self.cassette.read().expect("cassette lock").clone()
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.complete_labeled(request, None)
    }

    /// Like [`Gateway::complete`]; `purpose` is stored alongside recorded
    /// entries to make cassettes easier to curate by hand.
    pub fn complete_labeled(&self, request: &ChatRequest, purpose: Option<&str>) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let fingerprint = request.fingerprint();
        match self.mode {
            BackendMode::Replay => self.lookup(&fingerprint).ok_or(LlmError::CassetteMiss(fingerprint)),
            BackendMode::Live => self.call(request),
            BackendMode::Record => {
                if let Some(hit) = self.lookup(&fingerprint) {
                    debug!("record mode: served {fingerprint} from cassette");
                    return Ok(hit);
                }
                let response = self.call(request)?;
                let mut cassette = self.cassette.write().expect("cassette lock");
                cassette.insert(
                    fingerprint,
                    CassetteEntry {
                        content: response.content.clone(),
                        token_usage: response.token_usage,
                        purpose: purpose.map(str::to_owned),
                    },
                );
                if let Some(path) = &self.cassette_path {
                    cassette.save(path)?;
                }
                Ok(response)
            }
        }
    }

    fn lookup(&self, fingerprint: &Fingerprint) -> Option<ChatResponse> {
        let cassette = self.cassette.read().expect("cassette lock");
        cassette.get(fingerprint).map(|entry| ChatResponse {
            content: entry.content.clone(),
            token_usage: entry.token_usage,
            latency: Duration::ZERO,
        })
    }

    /// One round trip, retried once on a transient failure.
    fn call(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| LlmError::ProviderError("no transport configured".into()))?;
        let started = Instant::now();
        let completion = match transport.send(request) {
            Err(TransportError::Transient(reason)) => {
                warn!("transient provider failure, retrying once: {reason}");
                transport.send(request)
            }
            other => other,
        }
        .map_err(|e| LlmError::ProviderError(e.to_string()))?;
        if completion.finish_reason.as_deref() == Some("length") {
            return Err(LlmError::OutputTruncated);
        }
        Ok(ChatResponse {
            content: completion.content,
            token_usage: completion.token_usage,
            latency: started.elapsed(),
        })
    }
}

/// One model invocation as seen by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub purpose: String,
    pub fingerprint: Fingerprint,
    pub token_usage: TokenUsage,
    pub succeeded: bool,
}

/// Per-pipeline handle on a [`Gateway`] that fixes the model parameters
/// and keeps a log of every call.
#[derive(Debug)]
pub struct LlmClient<'g> {
    gateway: &'g Gateway,
    model_id: String,
    temperature: f64,
    max_output: u32,
    calls: Vec<CallRecord>,
}

impl<'g> LlmClient<'g> {
    pub fn new(gateway: &'g Gateway, model_id: impl Into<String>, temperature: f64, max_output: u32) -> Self {
        Self {
            gateway,
            model_id: model_id.into(),
            temperature,
            max_output,
            calls: Vec::new(),
        }
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            messages,
            model_id: self.model_id.clone(),
            temperature: self.temperature,
            max_output: self.max_output,
        }
    }

    pub fn send(&mut self, purpose: &str, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let result = self.gateway.complete_labeled(request, Some(purpose));
        self.calls.push(CallRecord {
            purpose: purpose.to_owned(),
            fingerprint: request.fingerprint(),
            token_usage: result.as_ref().map(|r| r.token_usage).unwrap_or_default(),
            succeeded: result.is_ok(),
        });
        result
    }

    pub fn calls(&self) -> &[CallRecord] {
        &self.calls
    }

    pub fn token_usage(&self) -> TokenUsage {
        let mut total = TokenUsage::default();
        for call in &self.calls {
            total += call.token_usage;
        }
        total
    }
}
