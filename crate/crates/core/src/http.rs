//! Minimal JSON-over-HTTP plumbing shared by the remote embedder and chat
//! backends: a swappable transport and a retry policy with exponential
//! backoff.

use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("transport error: {0}")]
    Other(String),
}

/// A status code and body as returned by the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str, timeout: Duration) -> Result<HttpReply, TransportError>;
}

/// Blocking transport over `ureq`.
#[derive(Debug, Clone)]
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &str, timeout: Duration) -> Result<HttpReply, TransportError> {
        let mut req = self
            .agent
            .post(url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("content-type", "application/json");
        for (k, v) in headers {
            req = req.header(k.as_str(), v.as_str());
        }
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            ureq::Error::Io(io) => TransportError::Connect(io.to_string()),
            ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => TransportError::Connect(e.to_string()),
            other => TransportError::Other(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| TransportError::Other(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// How often and how patiently to retry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay: Duration::from_millis(500) }
    }
}

/// Statuses worth another try.
pub fn is_transient(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

/// Outcome of [`send_with_retry`] when no usable reply arrived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetryFailure {
    /// Every attempt failed at the transport level; the last error is kept.
    Transport { attempts: u32, last: TransportError },
    /// Every attempt got a transient status; the last reply is kept.
    Status { attempts: u32, last: HttpReply },
}

/// Posts `body`, retrying transport failures and transient statuses with
/// delays of `base_delay`, `2 * base_delay`, ... between attempts. Any other
/// reply, successful or not, is returned as is.
pub fn send_with_retry(
    transport: &dyn Transport,
    policy: RetryPolicy,
    url: &str,
    headers: &[(String, String)],
    body: &str,
    timeout: Duration,
) -> Result<HttpReply, RetryFailure> {
    let attempts = policy.attempts.max(1);
    let mut failure = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(policy.base_delay * (1 << (attempt - 1)));
        }
        match transport.post_json(url, headers, body, timeout) {
            Ok(reply) if is_transient(reply.status) => {
                log::warn!("{url}: status {} on attempt {}", reply.status, attempt + 1);
                failure = Some(RetryFailure::Status { attempts, last: reply });
            }
            Ok(reply) => return Ok(reply),
            Err(e) => {
                log::warn!("{url}: {e} on attempt {}", attempt + 1);
                failure = Some(RetryFailure::Transport { attempts, last: e });
            }
        }
    }
    Err(failure.expect("at least one attempt"))
}
