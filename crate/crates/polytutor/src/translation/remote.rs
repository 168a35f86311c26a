//! HTTP client for an external translation service.
//!
//! Wire contract (JSON, UTF-8):
//!
//! ```text
//! POST {endpoint}/translate
//! Content-Type: application/json
//! Authorization: Bearer {api_key}          (omitted when no key is set)
//!
//! {"source":"en","target":"fa","text":"the book"}
//! ```
//!
//! Success is `200` with `{"text":"..."}`. Failures use any non-2xx status
//! with `{"error":{"kind":K,"message":"..."}}`, where `K` is one of
//! `unsupported_pair`, `auth`, `unavailable` or `bad_request`.
//!
//! Status `401`/`403` or kind `auth` map to `AuthFailure`, kind
//! `unsupported_pair` to `UnsupportedPair`. Status `5xx`, `429`, kind
//! `unavailable`, timeouts and connection errors are transient: the request
//! is retried up to `retries` times with exponential backoff, then surfaces
//! as `BackendUnavailable`. Anything else is `BackendUnavailable` without
//! retry.

use std::time::Duration;

use polytutor_core::translation::{LanguageCode, TranslateError, TranslationRequest, Translator};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
pub const DEFAULT_RETRIES: u32 = 2;
pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    /// Base URL; `/translate` is appended.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
    /// Delay before the first retry; doubled for each further one.
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
            backoff: DEFAULT_BACKOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub source: String,
    pub target: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireSuccess {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireErrorBody {
    pub kind: String,
    #[serde(default)]
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub error: WireErrorBody,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.config.endpoint)
            .field("timeout", &self.config.timeout)
            .field("retries", &self.config.retries)
            .finish_non_exhaustive()
    }
}

enum Attempt {
    Done(Result<String, TranslateError>),
    Unsupported,
    Transient(String),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/translate", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &str) -> Attempt {
        let mut request = self.agent.post(&self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match request.send(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        classify(status, &text)
    }
}

fn classify(status: u16, body: &str) -> Attempt {
    if (200..300).contains(&status) {
        return Attempt::Done(
            serde_json::from_str::<WireSuccess>(body)
                .map(|s| s.text)
                .map_err(|e| TranslateError::BackendUnavailable(format!("malformed response: {e}"))),
        );
    }
    let error = serde_json::from_str::<WireError>(body).ok().map(|e| e.error);
    let kind = error.as_ref().map(|e| e.kind.as_str());
    let message = error
        .as_ref()
        .map(|e| e.message.clone())
        .unwrap_or_else(|| format!("status {status}"));
    match (status, kind) {
        (401 | 403, _) | (_, Some("auth")) => Attempt::Done(Err(TranslateError::AuthFailure)),
        (_, Some("unsupported_pair")) => Attempt::Unsupported,
        (429 | 500..=599, _) | (_, Some("unavailable")) => Attempt::Transient(message),
        _ => Attempt::Done(Err(TranslateError::BackendUnavailable(message))),
    }
}

impl Translator for RemoteBackend {
    /// The service reports unsupported pairs itself, per request.
    fn supports(&self, _source: &LanguageCode, _target: &LanguageCode) -> bool {
        true
    }

    fn translate_text(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        let body = serde_json::to_string(&WireRequest {
            source: request.source.to_string(),
            target: request.target.to_string(),
            text: request.text.clone(),
        })
        .expect("strings always serialize");
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&body) {
                Attempt::Done(result) => return result,
                Attempt::Unsupported => {
                    return Err(TranslateError::UnsupportedPair {
                        from: request.source.clone(),
                        to: request.target.clone(),
                    })
                }
                Attempt::Transient(message) => last = message,
            }
        }
        Err(TranslateError::BackendUnavailable(format!(
            "gave up after {} attempts: {last}",
            self.config.retries + 1
        )))
    }
}
