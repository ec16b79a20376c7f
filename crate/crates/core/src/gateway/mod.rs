//! Embedding and completion model access.
//!
//! In provider mode requests go over HTTP using the OpenAI-style wire
//! format; in offline mode the gateway answers with [`deterministic_embed`]
//! and [`offline_summary`]. Every vector leaving the gateway is unit-norm.

mod http;
mod offline;

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use http::{HttpReply, Transport, UreqTransport};
pub use offline::{deterministic_embed, offline_model_id, offline_summary, DEFAULT_OFFLINE_DIM, OFFLINE_MODEL_PREFIX};

use crate::chunker::{count_tokens, Summarizer, SummaryError};

pub const SUMMARY_PROMPT: &str = "Generate a summary for the following code: \n";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("provider error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Provider { status: Option<u16>, message: String },
    #[error("empty input batch")]
    EmptyInput,
    #[error("provider returned inconsistent dimensions: expected {expected}, got {got}")]
    DimensionDrift { expected: usize, got: usize },
    #[error("text has no tokens to embed")]
    NoTokens,
    #[error("code has {tokens} tokens, completion limit is {limit}")]
    OverCompletionBudget { tokens: usize, limit: usize },
    #[error("environment variable {0} with the API key is not set")]
    MissingApiKey(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, backoff_base_ms: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_endpoint: String,
    pub embed_model: String,
    pub completion_endpoint: String,
    pub completion_model: String,
    pub completion_max_tokens: usize,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub retry: RetryPolicy,
    pub offline_mode: bool,
    pub offline_dim: usize,
    /// Texts per embedding request.
    pub batch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_endpoint: "https://api.openai.com/v1/embeddings".into(),
            embed_model: "text-embedding-ada-002".into(),
            completion_endpoint: "https://api.openai.com/v1/chat/completions".into(),
            completion_model: "gpt-4-32k".into(),
            completion_max_tokens: 32000,
            api_key_env: "OPENAI_API_KEY".into(),
            retry: RetryPolicy::default(),
            offline_mode: false,
            offline_dim: DEFAULT_OFFLINE_DIM,
            batch_size: 64,
        }
    }
}

impl ModelConfig {
    pub fn offline() -> Self {
        Self { offline_mode: true, ..Self::default() }
    }
}

/// Unit-norm embedding tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit length. Fails on empty, zero, or
    /// non-finite input.
    pub fn normalized(mut values: Vec<f64>, model_id: impl Into<String>) -> Result<Self, GatewayError> {
        let bad = |message: &str| GatewayError::Provider { status: None, message: message.into() };
        if values.is_empty() {
            return Err(bad("empty embedding"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite embedding component"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(bad("zero-norm embedding"));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self { values, model_id: model_id.into() })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub struct ModelGateway {
    cfg: ModelConfig,
    transport: Arc<dyn Transport>,
}

impl ModelGateway {
    pub fn new(cfg: ModelConfig) -> Self {
        Self::with_transport(cfg, Arc::new(UreqTransport::default()))
    }

    pub fn with_transport(cfg: ModelConfig, transport: Arc<dyn Transport>) -> Self {
        Self { cfg, transport }
    }

    pub fn offline() -> Self {
        Self::new(ModelConfig::offline())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Identity recorded alongside stored vectors.
    pub fn embed_model_id(&self) -> String {
        if self.cfg.offline_mode {
            offline_model_id(self.cfg.offline_dim)
        } else {
            self.cfg.embed_model.clone()
        }
    }

    pub fn embed_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        if self.cfg.offline_mode {
            return texts.iter().map(|t| deterministic_embed(t.as_ref(), self.cfg.offline_dim)).collect();
        }

        let mut out: Vec<EmbeddingVector> = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.cfg.batch_size.max(1)) {
            let vectors = self.embed_remote(batch)?;
            let expected = out.first().map(EmbeddingVector::dim).unwrap_or(vectors[0].dim());
            if let Some(v) = vectors.iter().find(|v| v.dim() != expected) {
                return Err(GatewayError::DimensionDrift { expected, got: v.dim() });
            }
            out.extend(vectors);
        }
        Ok(out)
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_remote<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        let input: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
        let body = json!({ "model": self.cfg.embed_model, "input": input });
        let reply = self.post_with_retry(&self.cfg.embed_endpoint, &body)?;
        parse_embeddings(&reply, texts.len(), &self.cfg.embed_model)
    }

    /// Asks the completion model for a summary of `code`.
    pub fn summarize_code(&self, code: &str) -> Result<String, GatewayError> {
        let tokens = count_tokens(code);
        if tokens > self.cfg.completion_max_tokens {
            return Err(GatewayError::OverCompletionBudget { tokens, limit: self.cfg.completion_max_tokens });
        }
        if self.cfg.offline_mode {
            return Ok(offline_summary(code));
        }
        let body = json!({
            "model": self.cfg.completion_model,
            "messages": [{ "role": "user", "content": format!("{SUMMARY_PROMPT}{code}") }],
        });
        let reply = self.post_with_retry(&self.cfg.completion_endpoint, &body)?;
        reply.pointer("/choices/0/message/content").and_then(Value::as_str).map(|s| s.trim().to_string()).ok_or_else(
            || GatewayError::Provider {
                status: None,
                message: "completion reply has no choices[0].message.content".into(),
            },
        )
    }

    fn api_key(&self) -> Result<String, GatewayError> {
        std::env::var(&self.cfg.api_key_env).map_err(|_| GatewayError::MissingApiKey(self.cfg.api_key_env.clone()))
    }

    /// POSTs `body`, retrying transport failures, 429 and 5xx with
    /// exponential backoff. Other statuses fail immediately.
    fn post_with_retry(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        let key = self.api_key()?;
        let attempts = self.cfg.retry.max_attempts.max(1);
        let mut last = GatewayError::Provider { status: None, message: "no attempt made".into() };
        for attempt in 1..=attempts {
            match self.transport.post_json(url, Some(&key), body) {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    return serde_json::from_str(&reply.body).map_err(|e| GatewayError::Provider {
                        status: Some(reply.status),
                        message: format!("invalid JSON reply: {e}"),
                    });
                }
                Ok(reply) => {
                    last = GatewayError::Provider { status: Some(reply.status), message: snippet(&reply.body) };
                    if !(reply.status == 429 || reply.status >= 500) {
                        return Err(last);
                    }
                }
                Err(message) => last = GatewayError::Provider { status: None, message },
            }
            if attempt < attempts {
                let delay = self.cfg.retry.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                log::warn!("request to {url} failed (attempt {attempt}/{attempts}): {last}; retrying in {delay}ms");
                thread::sleep(Duration::from_millis(delay));
            }
        }
        Err(last)
    }
}

impl Summarizer for ModelGateway {
    fn summarize(&self, code: &str) -> Result<String, SummaryError> {
        self.summarize_code(code).map_err(|e| match e {
            GatewayError::OverCompletionBudget { tokens, limit } => SummaryError::TooLong { tokens, limit },
            other => SummaryError::Unavailable(other.to_string()),
        })
    }
}

fn snippet(body: &str) -> String {
    body.chars().take(200).collect()
}

fn parse_embeddings(reply: &Value, expected: usize, model: &str) -> Result<Vec<EmbeddingVector>, GatewayError> {
    let bad = |message: String| GatewayError::Provider { status: None, message };
    let data =
        reply.get("data").and_then(Value::as_array).ok_or_else(|| bad("embedding reply has no `data` array".into()))?;
    if data.len() != expected {
        return Err(bad(format!("expected {expected} embeddings, got {}", data.len())));
    }

    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
    for item in data {
        let index =
            item.get("index").and_then(Value::as_u64).ok_or_else(|| bad("embedding item without `index`".into()))?
                as usize;
        let values = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("embedding item without `embedding`".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| bad("non-numeric embedding component".into())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((index, values));
    }
    rows.sort_by_key(|(i, _)| *i);
    if rows.iter().enumerate().any(|(pos, (i, _))| pos != *i) {
        return Err(bad("embedding indices are not 0..n".into()));
    }

    let dim = rows[0].1.len();
    if let Some((_, v)) = rows.iter().find(|(_, v)| v.len() != dim) {
        return Err(GatewayError::DimensionDrift { expected: dim, got: v.len() });
    }
    rows.into_iter().map(|(_, v)| EmbeddingVector::normalized(v, model)).collect()
}
