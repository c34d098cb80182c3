use rayon::prelude::*;

use crate::domain::Fqdn;

use super::embed::Embedder;
use super::index::{embedding_text, ReferenceIndex};
use super::DnxError;

/// An input name joined with its most similar reference domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub input: Fqdn,
    pub proximate: String,
    pub similarity: f64,
}

/// A batch of consecutive pairs in global sort order.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub id: usize,
    pub pairs: Vec<DomainPair>,
}

/// Pairs every input with its nearest reference entry, in input order.
/// Inputs that are themselves reference domains are paired too.
pub fn pair_inputs(inputs: &[Fqdn], index: &ReferenceIndex, embedder: &dyn Embedder) -> Result<Vec<DomainPair>, DnxError> {
    if embedder.id() != index.embedder_id() || embedder.dimension() != index.dimension() {
        return Err(DnxError::RebuildRequired { stored: index.embedder_id().to_string(), wanted: embedder.id() });
    }
    let texts: Vec<String> = inputs.iter().map(embedding_text).collect();
    let vectors = embedder.embed_batch(&texts)?;
    inputs
        .par_iter()
        .zip(vectors.par_iter())
        .map(|(input, v)| {
            let best = index.nearest(v, 1)?.into_iter().next().ok_or(DnxError::EmptyReference)?;
            Ok(DomainPair { input: input.clone(), proximate: best.domain, similarity: best.similarity })
        })
        .collect()
}

/// Sorts by (proximate, input) and cuts consecutive chunks of `chunk_size`;
/// the last chunk may be shorter. Ids count from 0.
pub fn sort_and_chunk(mut pairs: Vec<DomainPair>, chunk_size: usize) -> Vec<Chunk> {
    let size = chunk_size.max(1);
    pairs.sort_by(|a, b| a.proximate.cmp(&b.proximate).then_with(|| a.input.raw().cmp(b.input.raw())));
    let mut chunks = Vec::with_capacity(pairs.len().div_ceil(size));
    let mut iter = pairs.into_iter().peekable();
    while iter.peek().is_some() {
        let id = chunks.len();
        chunks.push(Chunk { id, pairs: iter.by_ref().take(size).collect() });
    }
    chunks
}
