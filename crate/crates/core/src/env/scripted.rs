use std::collections::VecDeque;
use std::sync::Mutex;

use super::{Backend, CompletionRequest, EnvError};

/// Replays queued replies in order and records every request it receives.
///
/// Once the queue is drained the fallback reply (if any) is returned forever.
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<Result<String, EnvError>>>,
    fallback: Option<String>,
    seen: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new(replies: impl IntoIterator<Item = Result<String, EnvError>>) -> Self {
        Self {
            queue: Mutex::new(replies.into_iter().collect()),
            fallback: None,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn from_texts<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(replies.into_iter().map(|s| Ok(s.into())))
    }

    pub fn repeating(reply: impl Into<String>) -> Self {
        Self::new([]).with_fallback(reply)
    }

    pub fn with_fallback(mut self, reply: impl Into<String>) -> Self {
        self.fallback = Some(reply.into());
        self
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError> {
        self.seen.lock().unwrap().push(request.clone());
        match self.queue.lock().unwrap().pop_front() {
            Some(reply) => reply,
            None => self
                .fallback
                .clone()
                .ok_or_else(|| EnvError::Transport("scripted backend exhausted".into())),
        }
    }

    fn fingerprint(&self) -> String {
        "scripted".to_string()
    }
}
