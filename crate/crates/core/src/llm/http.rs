use std::fmt;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo-0613";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const API_KEY_VAR: &str = "OPENAI_API_KEY";
pub const BASE_URL_VAR: &str = "OPENAI_BASE_URL";

#[derive(Clone)]
pub struct HttpConfig {
    pub base_url: String,
    api_key: String,
    pub model: String,
    /// Extra attempts after the first on transient failures.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_base: Duration,
    pub max_in_flight: usize,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            api_key: api_key.into(),
            model: DEFAULT_MODEL.to_string(),
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
            max_in_flight: 4,
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads the credential and optional endpoint from the environment.
    pub fn from_env() -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_VAR)
            .map_err(|_| LlmError::BackendUnavailable(format!("{API_KEY_VAR} is not set")))?;
        let base = std::env::var(BASE_URL_VAR).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        Ok(Self::new(base, key))
    }
}

impl fmt::Debug for HttpConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &"<redacted>")
            .field("model", &self.model)
            .field("max_retries", &self.max_retries)
            .field("backoff_base", &self.backoff_base)
            .field("max_in_flight", &self.max_in_flight)
            .finish()
    }
}

/// Counting semaphore bounding concurrent requests.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Client for a chat-completions endpoint.
pub struct HttpBackend {
    cfg: HttpConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend").field("cfg", &self.cfg).finish()
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: WireUsage,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Failure {
    Transient(String),
    Fatal(String),
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build();
        HttpBackend {
            agent: ureq::Agent::new_with_config(config),
            permits: Permits {
                free: Mutex::new(cfg.max_in_flight.max(1)),
                cv: Condvar::new(),
            },
            cfg,
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, req: &ChatRequest) -> Result<ChatResponse, Failure> {
        let body = json!({
            "model": self.cfg.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let response = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.cfg.api_key))
            .send_json(&body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Err(Failure::Transient(format!("transport error: {e}"))),
        };
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("server returned status {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(format!("server returned status {status}")));
        }
        let wire: WireResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Failure::Fatal(format!("unreadable response body: {e}")))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Failure::Fatal("response has no choices".into()))?;
        Ok(ChatResponse {
            content,
            prompt_tokens: wire.usage.prompt_tokens,
            completion_tokens: wire.usage.completion_tokens,
        })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        if req.messages.is_empty() {
            return Err(LlmError::EmptyRequest);
        }
        let _permit = self.permits.acquire();
        let mut delay = self.cfg.backoff_base;
        let mut attempt = 0;
        loop {
            log::debug!("chat request to {} (attempt {})", self.endpoint(), attempt + 1);
            match self.attempt(req) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(m)) => return Err(LlmError::BackendUnavailable(m)),
                Err(Failure::Transient(m)) if attempt >= self.cfg.max_retries => {
                    return Err(LlmError::BackendUnavailable(format!(
                        "{m} after {} attempts",
                        attempt + 1
                    )))
                }
                Err(Failure::Transient(m)) => {
                    log::warn!("{m}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }

    fn name(&self) -> &str {
        "http"
    }
}
