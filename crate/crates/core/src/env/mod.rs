//! Text-in, text-out environment.
//!
//! Every query the search makes goes through a [`Backend`]. Backends compose:
//! a [`CachedBackend`] or [`CallCounter`] wraps any other backend, and the
//! [`Environment`] front end turns prompts into requests with the configured
//! sampling settings.

mod cache;
mod http;
mod mock;
mod rate_limit;
mod scripted;

pub use cache::{cache_key, CachedBackend};
pub use http::{HttpBackend, HttpConfig, RetryPolicy, API_KEY_ENV};
pub use mock::{Landscape, MockBackend, MockProfile};
pub use rate_limit::{Clock, FakeClock, RateLimiter, SystemClock};
pub use scripted::ScriptedBackend;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnvError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("completion request has an empty prompt")]
    EmptyPrompt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Answer,
    Reward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
    pub purpose: Purpose,
    /// Distinguishes deliberate re-samples of the same prompt (self-consistency
    /// trials, repeated prompts, reward retries). Part of the cache key; never
    /// sent over the wire.
    #[serde(default)]
    pub sample: u32,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.prompt.trim().is_empty() {
            Err(EnvError::EmptyPrompt)
        } else {
            Ok(())
        }
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError>;

    /// Short description recorded in tree dumps.
    fn fingerprint(&self) -> String;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError> {
        (**self).complete(request)
    }

    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

/// Counts calls per purpose before forwarding them.
pub struct CallCounter<B> {
    inner: B,
    answers: AtomicUsize,
    rewards: AtomicUsize,
}

impl<B: Backend> CallCounter<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            answers: AtomicUsize::new(0),
            rewards: AtomicUsize::new(0),
        }
    }

    pub fn answer_calls(&self) -> usize {
        self.answers.load(Ordering::SeqCst)
    }

    pub fn reward_calls(&self) -> usize {
        self.rewards.load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> usize {
        self.answer_calls() + self.reward_calls()
    }
}

impl<B: Backend> Backend for CallCounter<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError> {
        match request.purpose {
            Purpose::Answer => self.answers.fetch_add(1, Ordering::SeqCst),
            Purpose::Reward => self.rewards.fetch_add(1, Ordering::SeqCst),
        };
        self.inner.complete(request)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }
}

/// Sampling settings applied to every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuerySettings {
    pub model_id: String,
    pub answer_temperature: f64,
    pub reward_temperature: f64,
    pub max_tokens: u32,
}

impl Default for QuerySettings {
    fn default() -> Self {
        Self {
            model_id: "gpt-3.5-turbo-instruct".to_string(),
            answer_temperature: 0.7,
            reward_temperature: 0.0,
            max_tokens: 512,
        }
    }
}

/// Backend plus the settings used to build requests for it.
#[derive(Clone)]
pub struct Environment {
    backend: Arc<dyn Backend>,
    settings: QuerySettings,
}

impl Environment {
    pub fn new(backend: Arc<dyn Backend>, settings: QuerySettings) -> Self {
        Self { backend, settings }
    }

    pub fn settings(&self) -> &QuerySettings {
        &self.settings
    }

    pub fn fingerprint(&self) -> String {
        self.backend.fingerprint()
    }

    pub fn request(&self, prompt: &str, purpose: Purpose, sample: u32) -> CompletionRequest {
        let temperature = match purpose {
            Purpose::Answer => self.settings.answer_temperature,
            Purpose::Reward => self.settings.reward_temperature,
        };
        CompletionRequest {
            prompt: prompt.to_string(),
            temperature,
            max_tokens: self.settings.max_tokens,
            model_id: self.settings.model_id.clone(),
            purpose,
            sample,
        }
    }

    pub fn complete(
        &self,
        prompt: &str,
        purpose: Purpose,
        sample: u32,
    ) -> Result<String, EnvError> {
        let request = self.request(prompt, purpose, sample);
        request.validate()?;
        self.backend.complete(&request)
    }
}
