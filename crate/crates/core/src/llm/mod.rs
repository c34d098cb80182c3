//! Chat backends: a generic HTTP chat-completion client, fixed and scripted
//! replies for tests, and a rule-based oracle with fault injection.

mod http;
mod oracle;

use std::sync::Mutex;

pub use http::{HttpChatBackend, HttpChatConfig};
pub use oracle::{FaultProfile, OracleBackend};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub system_text: String,
    pub user_text: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl LlmRequest {
    pub fn new(system_text: String, user_text: String, max_output_tokens: u32, temperature: f64) -> Result<LlmRequest, LlmError> {
        if system_text.trim().is_empty() || user_text.trim().is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt text".into()));
        }
        if !(0.0..=2.0).contains(&temperature) {
            return Err(LlmError::InvalidRequest(format!("temperature {temperature} outside [0, 2]")));
        }
        Ok(LlmRequest { system_text, user_text, max_output_tokens, temperature })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
}

/// Rough token count for providers that report none: one token per four
/// characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> String;
    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

fn respond(request: &LlmRequest, text: String, started: std::time::Instant) -> LlmResponse {
    LlmResponse {
        input_tokens: estimate_tokens(&request.system_text) + estimate_tokens(&request.user_text),
        output_tokens: estimate_tokens(&text),
        text,
        latency_ms: started.elapsed().as_millis() as u64,
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct FixedReplyBackend {
    pub reply: String,
}

impl ChatBackend for FixedReplyBackend {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        Ok(respond(request, self.reply.clone(), std::time::Instant::now()))
    }
}

/// Plays back a list of replies, one per call, then repeats the last one.
#[derive(Debug)]
pub struct ScriptedBackend {
    replies: Vec<Result<String, LlmError>>,
    calls: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(replies: Vec<Result<String, LlmError>>) -> ScriptedBackend {
        assert!(!replies.is_empty(), "scripted backend needs at least one reply");
        ScriptedBackend { replies, calls: Mutex::new(0) }
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().expect("poisoned")
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let started = std::time::Instant::now();
        let mut calls = self.calls.lock().expect("poisoned");
        let reply = self.replies[(*calls).min(self.replies.len() - 1)].clone();
        *calls += 1;
        reply.map(|text| respond(request, text, started))
    }
}
