//! Name embedders.

use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::http::{send_with_retry, RetryFailure, RetryPolicy, Transport, UreqTransport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("embedding service rejected the credential (status {0})")]
    Auth(u16),
    #[error("embedding request failed: {0}")]
    Transport(String),
    #[error("malformed embedding reply: {0}")]
    Malformed(String),
    #[error("embedder returned dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Turns names into fixed-length vectors.
pub trait Embedder: Send + Sync {
    /// Stable identity used to key persisted indexes.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;
}

pub const DEFAULT_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const HASH_SEED: u64 = 0x9ae1_6a3b_2f90_404f;

fn gram_hash(gram: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ HASH_SEED;
    for &b in gram {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 finalizer
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Signed character 2- and 3-gram hashing of `^text$` into `dim` buckets,
/// L2-normalized. Deterministic across runs and platforms.
pub fn embed_local_dim(text: &str, dim: usize) -> Vec<f32> {
    let mut padded = Vec::with_capacity(text.len() + 2);
    padded.push(b'^');
    padded.extend_from_slice(text.as_bytes());
    padded.push(b'$');
    let mut acc = vec![0f64; dim];
    for n in [2, 3] {
        for gram in padded.windows(n) {
            let h = gram_hash(gram);
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            acc[(h % dim as u64) as usize] += sign;
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        let mut unit = vec![0f32; dim];
        unit[0] = 1.0;
        return unit;
    }
    acc.iter().map(|v| (v / norm) as f32).collect()
}

/// [`embed_local_dim`] at the default dimension.
pub fn embed_local(text: &str) -> Vec<f32> {
    embed_local_dim(text, DEFAULT_DIMENSION)
}

/// The bundled offline embedder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalEmbedder {
    pub dim: usize,
}

impl Default for LocalEmbedder {
    fn default() -> Self {
        LocalEmbedder { dim: DEFAULT_DIMENSION }
    }
}

impl Embedder for LocalEmbedder {
    fn id(&self) -> String {
        format!("local-ngram-v1/{}", self.dim)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.par_iter().map(|t| embed_local_dim(t, self.dim)).collect())
    }
}

/// Settings for an embeddings endpoint speaking the common
/// `{"model", "input": [...]}` → `{"data": [{"embedding", "index"}]}` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub dimension: usize,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_batch() -> usize {
    256
}

fn default_timeout() -> u64 {
    60
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    api_key: String,
    transport: Box<dyn Transport>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder").field("config", &self.config).finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct EmbeddingReply {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f32>,
    index: usize,
}

impl RemoteEmbedder {
    /// Reads the credential from the environment; fails before any request
    /// when it is missing.
    pub fn new(config: RemoteEmbedderConfig) -> Result<RemoteEmbedder, EmbedError> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let api_key = key.ok_or_else(|| EmbedError::MissingCredential(config.api_key_env.clone()))?;
        Ok(RemoteEmbedder { config, api_key, transport: Box::new(UreqTransport::default()), retry: RetryPolicy::default() })
    }

    pub fn with_transport(mut self, transport: Box<dyn Transport>, retry: RetryPolicy) -> RemoteEmbedder {
        self.transport = transport;
        self.retry = retry;
        self
    }

    fn embed_one_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let body = serde_json::json!({ "model": self.config.model, "input": texts }).to_string();
        let headers = [("authorization".to_string(), format!("Bearer {}", self.api_key))];
        let reply = send_with_retry(
            self.transport.as_ref(),
            self.retry,
            &self.config.endpoint,
            &headers,
            &body,
            Duration::from_secs(self.config.timeout_secs),
        )
        .map_err(|f| match f {
            RetryFailure::Transport { last, .. } => EmbedError::Transport(last.to_string()),
            RetryFailure::Status { last, .. } => EmbedError::Transport(format!("status {}", last.status)),
        })?;
        match reply.status {
            200..=299 => {}
            401 | 403 => return Err(EmbedError::Auth(reply.status)),
            s => return Err(EmbedError::Transport(format!("status {s}"))),
        }
        let parsed: EmbeddingReply = serde_json::from_str(&reply.body).map_err(|e| EmbedError::Malformed(e.to_string()))?;
        let mut out = vec![Vec::new(); texts.len()];
        for item in parsed.data {
            let slot = out.get_mut(item.index).ok_or_else(|| EmbedError::Malformed(format!("index {} out of range", item.index)))?;
            if item.embedding.len() != self.config.dimension {
                return Err(EmbedError::Dimension { expected: self.config.dimension, got: item.embedding.len() });
            }
            if item.embedding.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::Malformed("non-finite value".into()));
            }
            let norm = item.embedding.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            *slot = if norm > 0.0 { item.embedding.iter().map(|&v| (f64::from(v) / norm) as f32).collect() } else { item.embedding };
        }
        if out.iter().any(Vec::is_empty) {
            return Err(EmbedError::Malformed("missing embeddings".into()));
        }
        Ok(out)
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}/{}", self.config.model, self.config.dimension)
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.batch_size.max(1)) {
            out.extend(self.embed_one_batch(batch)?);
        }
        Ok(out)
    }
}
