//! The reference index: embedded reference domains with exact top-k search
//! and a binary sidecar.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::domain::Fqdn;
use crate::psl::SuffixRules;
use crate::squat::RankedDomain;

use super::embed::{EmbedError, Embedder};
use super::DnxError;

const MAGIC: &[u8; 4] = b"SQIX";
const VERSION: u32 = 1;
const NAME_WIDTH: usize = 253;

/// Dot product with eight fixed accumulation lanes. Every similarity in the
/// crate goes through this kernel so that results are reproducible.
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            lanes[l] += x[l] * y[l];
        }
    }
    let mut tail = 0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    let pairs = [lanes[0] + lanes[4], lanes[1] + lanes[5], lanes[2] + lanes[6], lanes[3] + lanes[7]];
    (pairs[0] + pairs[2]) + (pairs[1] + pairs[3]) + tail
}

pub fn norm(a: &[f32]) -> f64 {
    f64::from(dot(a, a)).sqrt()
}

fn similarity(a: &[f32], norm_a: f64, b: &[f32], norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (f64::from(dot(a, b)) / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Cosine similarity in [-1, 1]; 0 when either vector is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    similarity(a, norm(a), b, norm(b))
}

/// One search hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub entry: usize,
    pub domain: String,
    pub rank: u32,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceIndex {
    embedder_id: String,
    dim: usize,
    domains: Vec<String>,
    ranks: Vec<u32>,
    vectors: Vec<f32>,
    norms: Vec<f64>,
    by_name: HashMap<String, usize>,
}

struct Candidate<'a> {
    similarity: f64,
    rank: u32,
    domain: &'a str,
    entry: usize,
}

impl Candidate<'_> {
    /// `Less` when `self` ranks ahead of `other`.
    fn order(&self, other: &Self) -> Ordering {
        other
            .similarity
            .total_cmp(&self.similarity)
            .then(self.rank.cmp(&other.rank))
            .then_with(|| self.domain.cmp(other.domain))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.order(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order(other)
    }
}

/// Text embedded for a name: everything left of the public suffix.
pub fn embedding_text(fqdn: &Fqdn) -> String {
    fqdn.without_suffix()
}

impl ReferenceIndex {
    /// Embeds every row. Names are normalized; a repeated name keeps its
    /// first (best) rank.
    pub fn build(rows: &[RankedDomain], embedder: &dyn Embedder, rules: &SuffixRules) -> Result<ReferenceIndex, DnxError> {
        let mut seen = std::collections::HashSet::new();
        let mut domains = Vec::new();
        let mut ranks = Vec::new();
        let mut texts = Vec::new();
        for row in rows {
            let fqdn = Fqdn::parse(&row.domain, rules).map_err(|e| DnxError::Reference(format!("{}: {e}", row.domain)))?;
            if fqdn.raw().len() > NAME_WIDTH || !seen.insert(fqdn.raw().to_string()) {
                continue;
            }
            texts.push(embedding_text(&fqdn));
            domains.push(fqdn.raw().to_string());
            ranks.push(row.rank);
        }
        if domains.is_empty() {
            return Err(DnxError::EmptyReference);
        }
        let dim = embedder.dimension();
        let embedded = embedder.embed_batch(&texts)?;
        let mut vectors = Vec::with_capacity(domains.len() * dim);
        for v in embedded {
            if v.len() != dim {
                return Err(EmbedError::Dimension { expected: dim, got: v.len() }.into());
            }
            vectors.extend(v);
        }
        Ok(ReferenceIndex::from_parts(embedder.id(), dim, domains, ranks, vectors))
    }

    fn from_parts(embedder_id: String, dim: usize, domains: Vec<String>, ranks: Vec<u32>, vectors: Vec<f32>) -> ReferenceIndex {
        let norms = vectors.chunks_exact(dim).map(norm).collect();
        let by_name = domains.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect();
        ReferenceIndex { embedder_id, dim, domains, ranks, vectors, norms, by_name }
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn domain(&self, entry: usize) -> &str {
        &self.domains[entry]
    }

    pub fn rank(&self, entry: usize) -> u32 {
        self.ranks[entry]
    }

    pub fn vector(&self, entry: usize) -> &[f32] {
        &self.vectors[entry * self.dim..(entry + 1) * self.dim]
    }

    pub fn position(&self, domain: &str) -> Option<usize> {
        self.by_name.get(domain).copied()
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.by_name.contains_key(domain)
    }

    /// Similarity between a query and one entry, via the shared kernel.
    pub fn similarity_to(&self, query: &[f32], entry: usize) -> f64 {
        similarity(query, norm(query), self.vector(entry), self.norms[entry])
    }

    /// Exact top-`k` by cosine similarity, best first. Ties go to the better
    /// rank, then the smaller name. Returns every entry when `k` exceeds the
    /// index size.
    pub fn nearest(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>, DnxError> {
        if query.len() != self.dim {
            return Err(DnxError::Dimension { expected: self.dim, got: query.len() });
        }
        if k == 0 {
            return Err(DnxError::ZeroK);
        }
        let qn = norm(query);
        let mut heap: BinaryHeap<Candidate<'_>> = BinaryHeap::with_capacity(k.min(self.len()) + 1);
        for entry in 0..self.len() {
            let cand = Candidate {
                similarity: similarity(query, qn, self.vector(entry), self.norms[entry]),
                rank: self.ranks[entry],
                domain: &self.domains[entry],
                entry,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if heap.peek().is_some_and(|worst| cand < *worst) {
                heap.pop();
                heap.push(cand);
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor { entry: c.entry, domain: c.domain.to_string(), rank: c.rank, similarity: c.similarity })
            .collect())
    }

    /// Writes the sidecar: magic, version, embedder id, dimension, count,
    /// then fixed-width records of rank, name length, padded name and
    /// little-endian `f32` values.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let id = self.embedder_id.as_bytes();
        w.write_all(&(id.len() as u16).to_le_bytes())?;
        w.write_all(id)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        let mut name_buf = [0u8; NAME_WIDTH];
        for entry in 0..self.len() {
            w.write_all(&self.ranks[entry].to_le_bytes())?;
            let name = self.domains[entry].as_bytes();
            name_buf.fill(0);
            name_buf[..name.len()].copy_from_slice(name);
            w.write_all(&[name.len() as u8])?;
            w.write_all(&name_buf)?;
            for v in self.vector(entry) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    }

    /// Reads a sidecar written for `embedder_id` at dimension `dim`.
    pub fn load(path: &Path, embedder_id: &str, dim: usize) -> Result<ReferenceIndex, DnxError> {
        let file = fs::File::open(path).map_err(|e| DnxError::Io(e.to_string()))?;
        let mut r = BufReader::new(file);
        let corrupt = |what: &str| DnxError::CorruptSidecar(what.to_string());
        let mut read = |n: usize| -> Result<Vec<u8>, DnxError> {
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf).map_err(|_| corrupt("truncated"))?;
            Ok(buf)
        };
        if read(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let u32_at = |b: Vec<u8>| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        if u32_at(read(4)?) != VERSION {
            return Err(corrupt("unsupported version"));
        }
        let id_len = u16::from_le_bytes(read(2)?.try_into().expect("2 bytes")) as usize;
        let stored_id = String::from_utf8(read(id_len)?).map_err(|_| corrupt("embedder id"))?;
        let stored_dim = u32_at(read(4)?) as usize;
        if stored_id != embedder_id || stored_dim != dim {
            return Err(DnxError::RebuildRequired {
                stored: format!("{stored_id} (dimension {stored_dim})"),
                wanted: format!("{embedder_id} (dimension {dim})"),
            });
        }
        let count = u64::from_le_bytes(read(8)?.try_into().expect("8 bytes")) as usize;
        if count == 0 || stored_dim == 0 {
            return Err(corrupt("empty index"));
        }
        let mut domains = Vec::with_capacity(count);
        let mut ranks = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count.saturating_mul(dim).min(1 << 28));
        for _ in 0..count {
            ranks.push(u32_at(read(4)?));
            let len = read(1)?[0] as usize;
            let name = read(NAME_WIDTH)?;
            if len == 0 || len > NAME_WIDTH {
                return Err(corrupt("name length"));
            }
            domains.push(String::from_utf8(name[..len].to_vec()).map_err(|_| corrupt("name"))?);
            let raw = read(dim * 4)?;
            vectors.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))));
        }
        if read(1).is_ok() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(ReferenceIndex::from_parts(stored_id, stored_dim, domains, ranks, vectors))
    }

    /// Loads the sidecar when it matches `rows` and `embedder`, otherwise
    /// builds the index and writes a fresh sidecar. A sidecar for another
    /// embedder or dimension is an error; a damaged one is rebuilt.
    pub fn load_or_build(
        path: &Path,
        rows: &[RankedDomain],
        embedder: &dyn Embedder,
        rules: &SuffixRules,
    ) -> Result<ReferenceIndex, DnxError> {
        if path.exists() {
            match ReferenceIndex::load(path, &embedder.id(), embedder.dimension()) {
                Ok(index) if index.matches_rows(rows, rules) => return Ok(index),
                Ok(_) => log::info!("{}: reference list changed, rebuilding", path.display()),
                Err(e @ DnxError::RebuildRequired { .. }) => return Err(e),
                Err(e) => log::warn!("{}: {e}, rebuilding", path.display()),
            }
        }
        let index = ReferenceIndex::build(rows, embedder, rules)?;
        index.save(path).map_err(|e| DnxError::Io(format!("{}: {e}", path.display())))?;
        Ok(index)
    }

    fn matches_rows(&self, rows: &[RankedDomain], rules: &SuffixRules) -> bool {
        let mut seen = std::collections::HashSet::new();
        let expected: Vec<(String, u32)> = rows
            .iter()
            .filter_map(|r| Fqdn::parse(&r.domain, rules).ok().map(|f| (f.raw().to_string(), r.rank)))
            .filter(|(d, _)| d.len() <= NAME_WIDTH && seen.insert(d.clone()))
            .collect();
        expected.len() == self.len()
            && expected.iter().enumerate().all(|(i, (d, r))| self.domains[i] == *d && self.ranks[i] == *r)
    }
}
