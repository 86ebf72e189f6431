use std::sync::Arc;
use std::time::Duration;

use log::{debug, warn};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{Backend, Clock, CompletionRequest, EnvError, RateLimiter, SystemClock};

/// Environment variable holding the bearer token for the live endpoint.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay_ms: 1_000,
            max_delay_ms: 60_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << retry.min(32))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full URL of the completions endpoint, e.g. `https://api.openai.com/v1/completions`.
    pub endpoint: String,
    pub requests_per_minute: usize,
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/completions".to_string(),
            requests_per_minute: 60,
            retry: RetryPolicy::default(),
            timeout_secs: 120,
        }
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    n: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

enum Failure {
    Retry(EnvError),
    Fatal(EnvError),
}

/// Blocking client for an OpenAI-compatible `/v1/completions` endpoint.
pub struct HttpBackend {
    client: Client,
    config: HttpConfig,
    api_key: Option<String>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig, api_key: Option<String>) -> Result<Self, EnvError> {
        Self::with_clock(config, api_key, Arc::new(SystemClock::default()))
    }

    /// Reads the key from [`API_KEY_ENV`]; an unset or empty variable is an error.
    /// Servers that need no key can be given any placeholder value.
    pub fn from_env(config: HttpConfig) -> Result<Self, EnvError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.trim().is_empty() => Self::new(config, Some(key)),
            _ => Err(EnvError::AuthFailure(format!("{API_KEY_ENV} is not set"))),
        }
    }

    pub fn with_clock(
        config: HttpConfig,
        api_key: Option<String>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EnvError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EnvError::Transport(e.to_string()))?;
        let limiter = RateLimiter::new(config.requests_per_minute, clock.clone());
        Ok(Self {
            client,
            config,
            api_key,
            limiter,
            clock,
        })
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<String, Failure> {
        self.limiter.acquire();
        let body = CompletionBody {
            model: &request.model_id,
            prompt: &request.prompt,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            n: 1,
        };
        let mut builder = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                Failure::Retry(EnvError::Transport(e.to_string()))
            } else {
                Failure::Fatal(EnvError::Transport(e.to_string()))
            }
        })?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| Failure::Retry(EnvError::Transport(e.to_string())))?;
        match status {
            s if s.is_success() => {
                let parsed: CompletionResponse = serde_json::from_str(&text)
                    .map_err(|e| Failure::Fatal(EnvError::MalformedResponse(e.to_string())))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.text)
                    .ok_or_else(|| {
                        Failure::Fatal(EnvError::MalformedResponse("no choices in response".into()))
                    })
            }
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Err(Failure::Fatal(
                EnvError::AuthFailure(format!("{status}: {text}")),
            )),
            StatusCode::TOO_MANY_REQUESTS => {
                Err(Failure::Retry(EnvError::RateLimited { attempts: 0 }))
            }
            s if s.is_server_error() => Err(Failure::Retry(EnvError::Transport(format!(
                "{status}: {text}"
            )))),
            _ => Err(Failure::Fatal(EnvError::Transport(format!(
                "{status}: {text}"
            )))),
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError> {
        request.validate()?;
        let attempts = self.config.retry.max_retries + 1;
        let mut last = EnvError::Transport("no attempt made".into());
        for attempt in 0..attempts {
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(err)) => return Err(err),
                Err(Failure::Retry(err)) => {
                    last = err;
                    if attempt + 1 < attempts {
                        let delay = self.config.retry.delay(attempt);
                        debug!("transient failure ({last}); retrying in {delay:?}");
                        self.clock.sleep(delay);
                    }
                }
            }
        }
        warn!("giving up after {attempts} attempts: {last}");
        Err(match last {
            EnvError::RateLimited { .. } => EnvError::RateLimited { attempts },
            other => other,
        })
    }

    fn fingerprint(&self) -> String {
        format!("http:{}", self.config.endpoint)
    }
}
