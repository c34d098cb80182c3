use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, ChatBackend, LlmError, LlmRequest, LlmResponse};
use crate::http::{send_with_retry, RetryFailure, RetryPolicy, Transport, TransportError, UreqTransport};

/// Settings for a chat-completion endpoint taking
/// `{"model", "messages": [{"role", "content"}], ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpChatConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(default = "default_in_flight")]
    pub in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout() -> u64 {
    120
}

pub struct HttpChatBackend {
    config: HttpChatConfig,
    transport: Box<dyn Transport>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl HttpChatBackend {
    pub fn new(config: HttpChatConfig) -> HttpChatBackend {
        HttpChatBackend { config, transport: Box::new(UreqTransport::default()), retry: RetryPolicy::default() }
    }

    pub fn with_transport(mut self, transport: Box<dyn Transport>, retry: RetryPolicy) -> HttpChatBackend {
        self.transport = transport;
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &HttpChatConfig {
        &self.config
    }

    fn api_key(&self) -> Result<String, LlmError> {
        std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| LlmError::Auth(format!("environment variable {} is not set", self.config.api_key_env)))
    }
}

impl ChatBackend for HttpChatBackend {
    fn name(&self) -> String {
        self.config.model.clone()
    }

    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let key = self.api_key()?;
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
        .to_string();
        let headers = [("authorization".to_string(), format!("Bearer {key}"))];
        let started = Instant::now();
        let reply = send_with_retry(
            self.transport.as_ref(),
            self.retry,
            &self.config.endpoint,
            &headers,
            &body,
            Duration::from_secs(self.config.timeout_secs),
        )
        .map_err(|f| match f {
            RetryFailure::Transport { attempts, last: TransportError::Timeout } => LlmError::Timeout { attempts },
            RetryFailure::Transport { last, .. } => LlmError::Transport(last.to_string()),
            RetryFailure::Status { last, .. } => LlmError::Transport(format!("status {}", last.status)),
        })?;
        match reply.status {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth(format!("status {}", reply.status))),
            s => return Err(LlmError::Transport(format!("status {s}: {}", reply.body.chars().take(200).collect::<String>()))),
        }
        let parsed: ChatReply = serde_json::from_str(&reply.body).map_err(|e| LlmError::MalformedReply(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::MalformedReply("no message content".into()))?;
        let usage = parsed.usage.unwrap_or(Usage { prompt_tokens: None, completion_tokens: None });
        Ok(LlmResponse {
            input_tokens: usage
                .prompt_tokens
                .unwrap_or_else(|| estimate_tokens(&request.system_text) + estimate_tokens(&request.user_text)),
            output_tokens: usage.completion_tokens.unwrap_or_else(|| estimate_tokens(&text)),
            text,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
