//! Chat-completion abstraction with a deterministic scripted backend and an
//! HTTP client for chat-completions compatible services.

mod http;
mod scripted;

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, DEFAULT_MODEL};
pub use scripted::{Reply, ScriptedBackend};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("language backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no fixture matches prompt: {0}")]
    FixtureMiss(String),
    #[error("chat request has no messages")]
    EmptyRequest,
    #[error("bad fixture: {0}")]
    BadFixture(String),
}

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
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// A zero-temperature request.
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            messages,
            temperature: 0.0,
            max_tokens: 256,
        }
    }

    pub fn last_user(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl ChatResponse {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;

    /// Short label used in reports.
    fn name(&self) -> &str;
}

/// One logged backend exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: String,
    pub request: ChatRequest,
    pub response: Option<ChatResponse>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenTotals {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    fn add(&mut self, r: &ChatResponse) {
        self.calls += 1;
        self.prompt_tokens += r.prompt_tokens;
        self.completion_tokens += r.completion_tokens;
    }
}

#[derive(Debug, Default)]
struct LogInner {
    records: Vec<CallRecord>,
    per_role: BTreeMap<String, TokenTotals>,
}

/// Records every exchange made through it and keeps running token counters
/// per caller role.
#[derive(Debug, Default)]
pub struct CallLog {
    inner: Mutex<LogInner>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn complete(
        &self,
        backend: &dyn ChatBackend,
        role: &str,
        req: &ChatRequest,
    ) -> Result<ChatResponse, LlmError> {
        let result = backend.complete(req);
        let mut inner = self.inner.lock().unwrap();
        let totals = inner.per_role.entry(role.to_string()).or_default();
        if let Ok(r) = &result {
            totals.add(r);
        }
        inner.records.push(CallRecord {
            role: role.to_string(),
            request: req.clone(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
        });
        result
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.inner.lock().unwrap().records.clone()
    }

    pub fn per_role(&self) -> BTreeMap<String, TokenTotals> {
        self.inner.lock().unwrap().per_role.clone()
    }

    pub fn totals(&self) -> TokenTotals {
        let inner = self.inner.lock().unwrap();
        let mut t = TokenTotals::default();
        for r in inner.per_role.values() {
            t.calls += r.calls;
            t.prompt_tokens += r.prompt_tokens;
            t.completion_tokens += r.completion_tokens;
        }
        t
    }
}

#[cfg(test)]
mod tests;
