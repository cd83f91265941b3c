use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{ChatRequest, TokenUsage};

/// Raw provider output before the gateway applies its policies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    pub token_usage: TokenUsage,
    pub finish_reason: Option<String>,
}

impl Completion {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            token_usage: TokenUsage::default(),
            finish_reason: Some("stop".into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    /// Worth one retry: rate limits, 5xx, connection resets, timeouts.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError>;
}

type SendFn = dyn Fn(&ChatRequest) -> Result<Completion, TransportError> + Send + Sync;

/// Wraps a closure; handy for scripted backends.
pub struct FnTransport(Box<SendFn>);

impl FnTransport {
    pub fn new(f: impl Fn(&ChatRequest) -> Result<Completion, TransportError> + Send + Sync + 'static) -> Self {
        Self(Box::new(f))
    }
}

impl Transport for FnTransport {
    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError> {
        (self.0)(request)
    }
}

/// Endpoint, model and credential source for a live provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmProfile {
    /// Chat-completions URL, e.g. `https://api.example.com/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

/// OpenAI-style chat-completions client.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            endpoint: endpoint.into(),
            api_key,
        }
    }

    /// Builds a transport from a profile, reading the key from its env var.
    pub fn from_profile(profile: &LlmProfile) -> Result<Self, TransportError> {
        let api_key = match &profile.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| TransportError::Fatal(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        Ok(Self::new(
            profile.endpoint.clone(),
            api_key,
            Duration::from_secs(profile.timeout_secs),
        ))
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError> {
        let body = json!({
            "model": request.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        });
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(&body).map_err(|e| match e {
            ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed => {
                TransportError::Transient(e.to_string())
            }
            other => TransportError::Fatal(other.to_string()),
        })?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError::Fatal(format!("HTTP {status}: {detail}")));
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Fatal(format!("unreadable response body: {e}")))?;
        parse_completion(&value)
    }
}

fn parse_completion(value: &Value) -> Result<Completion, TransportError> {
    let choice = value
        .pointer("/choices/0")
        .ok_or_else(|| TransportError::Fatal("response has no choices".into()))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| TransportError::Fatal("response choice has no message content".into()))?
        .to_owned();
    let usage = |key: &str| value.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(Completion {
        content,
        token_usage: TokenUsage {
            prompt: usage("prompt_tokens"),
            completion: usage("completion_tokens"),
        },
        finish_reason: choice.get("finish_reason").and_then(Value::as_str).map(str::to_owned),
    })
}
