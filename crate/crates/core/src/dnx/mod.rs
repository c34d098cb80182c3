//! Domain-name expansion: embed names, find their nearest reference
//! domains, and batch the resulting pairs.

mod embed;
mod index;
mod pair;

pub use embed::{embed_local, embed_local_dim, EmbedError, Embedder, LocalEmbedder, RemoteEmbedder, RemoteEmbedderConfig, DEFAULT_DIMENSION};
pub use index::{cosine, dot, embedding_text, norm, Neighbor, ReferenceIndex};
pub use pair::{pair_inputs, sort_and_chunk, Chunk, DomainPair};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DnxError {
    #[error("reference list is empty")]
    EmptyReference,
    #[error("bad reference entry {0}")]
    Reference(String),
    #[error("query dimension {got} does not match index dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index was built with {stored} but {wanted} is configured; rebuild the index")]
    RebuildRequired { stored: String, wanted: String },
    #[error("corrupt index sidecar: {0}")]
    CorruptSidecar(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}
