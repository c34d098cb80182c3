//! Verdict files, run summaries by technique and target popularity, and
//! token cost estimates.

mod cost;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use cost::{CostModel, Usd};

use crate::domain::{SquattingType, Verdict, VerdictSource};
use crate::trv::TokenTotals;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("verdict line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a verdict file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictRecord {
    pub input: String,
    pub s: String,
    pub d: String,
    pub sx: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub target: String,
    pub source: VerdictSource,
    /// Chunk id; absent for verdicts that did not pass through a model.
    pub chunk: Option<usize>,
    pub attempts: Option<u32>,
}

impl VerdictRecord {
    pub fn new(v: &Verdict, chunk: Option<usize>, attempts: Option<u32>) -> VerdictRecord {
        VerdictRecord {
            input: v.fqdn.raw().to_string(),
            s: v.fqdn.subdomain().to_string(),
            d: v.fqdn.label().to_string(),
            sx: v.fqdn.suffix().to_string(),
            kind: v.kind.name().to_string(),
            target: v.target.clone(),
            source: v.source,
            chunk,
            attempts,
        }
    }
}

/// Writes one JSON object per line, sorted by input name. Returns the
/// number of lines.
pub fn emit_verdicts<W: Write>(records: &[VerdictRecord], mut out: W) -> std::io::Result<usize> {
    let mut sorted: Vec<&VerdictRecord> = records.iter().collect();
    sorted.sort();
    for r in &sorted {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(sorted.len())
}

pub fn read_verdicts<R: BufRead>(reader: R) -> Result<Vec<VerdictRecord>, ReportError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VerdictRecord =
            serde_json::from_str(&line).map_err(|e| ReportError::Parse { line: i + 1, reason: e.to_string() })?;
        if SquattingType::from_name(&rec.kind).is_none() {
            return Err(ReportError::Parse { line: i + 1, reason: format!("unknown type {:?}", rec.kind) });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Popularity band of a target's rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Under1k,
    To10k,
    To100k,
    To1m,
    Over1m,
}

impl Bucket {
    pub const ALL: [Bucket; 5] = [Bucket::Under1k, Bucket::To10k, Bucket::To100k, Bucket::To1m, Bucket::Over1m];

    /// Unranked targets fall in the last band.
    pub fn of(rank: Option<u32>) -> Bucket {
        match rank {
            Some(r) if r < 1_000 => Bucket::Under1k,
            Some(r) if r <= 10_000 => Bucket::To10k,
            Some(r) if r <= 100_000 => Bucket::To100k,
            Some(r) if r <= 1_000_000 => Bucket::To1m,
            _ => Bucket::Over1m,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::Under1k => "<1k",
            Bucket::To10k => "1k-10k",
            Bucket::To100k => "10k-100k",
            Bucket::To1m => "100k-1M",
            Bucket::Over1m => ">1M",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub name: String,
    pub count: usize,
    /// Share of all verdicts, rounded to one decimal.
    pub percent: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ChunkCounts {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub verdicts: usize,
    pub by_type: Vec<CountRow>,
    pub by_bucket: Vec<CountRow>,
    pub chunks: Option<ChunkCounts>,
    pub tokens: Option<TokenTotals>,
    pub cost: Option<CostLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostLine {
    pub model: String,
    pub usd: Usd,
}

/// `count / total` as a percentage with one decimal, rounded half up.
pub fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let tenths = (count as u128 * 2000 + total as u128) / (2 * total as u128);
    tenths as f64 / 10.0
}

fn rows<K>(counts: &BTreeMap<K, usize>, names: impl Fn(&K) -> String, total: usize) -> Vec<CountRow> {
    counts
        .iter()
        .map(|(k, &count)| CountRow { name: names(k), count, percent: percent(count, total) })
        .collect()
}

/// Counts verdicts per technique and per target popularity band. `rank_of`
/// looks a target up in the reference list.
pub fn summarize(records: &[VerdictRecord], rank_of: impl Fn(&str) -> Option<u32>) -> RunSummary {
    let mut types: BTreeMap<usize, usize> = (0..SquattingType::NAMES.len()).map(|i| (i, 0)).collect();
    let mut buckets: BTreeMap<Bucket, usize> = Bucket::ALL.iter().map(|b| (*b, 0)).collect();
    for r in records {
        if let Some(i) = SquattingType::NAMES.iter().position(|n| *n == r.kind) {
            *types.entry(i).or_default() += 1;
        }
        *buckets.entry(Bucket::of(rank_of(&r.target))).or_default() += 1;
    }
    let total = records.len();
    RunSummary {
        verdicts: total,
        by_type: rows(&types, |i| SquattingType::NAMES[*i].to_string(), total),
        by_bucket: rows(&buckets, |b| b.label().to_string(), total),
        chunks: None,
        tokens: None,
        cost: None,
    }
}

impl RunSummary {
    pub fn with_chunks(mut self, chunks: ChunkCounts, tokens: TokenTotals) -> RunSummary {
        self.chunks = Some(chunks);
        self.tokens = Some(tokens);
        self
    }

    pub fn with_cost(mut self, model: &CostModel) -> RunSummary {
        if let Some(t) = self.tokens {
            self.cost = Some(CostLine { model: model.name.clone(), usd: model.estimate(t.input, t.output) });
        }
        self
    }

    /// Aligned plain-text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let section = |out: &mut String, title: &str, rows: &[CountRow]| {
            let width = rows.iter().map(|r| r.name.len()).chain([title.len(), 5]).max().unwrap_or(5);
            let _ = writeln!(out, "{title:<width$}  {:>7}  {:>6}", "count", "share");
            for r in rows {
                let _ = writeln!(out, "{:<width$}  {:>7}  {:>5.1}%", r.name, r.count, r.percent);
            }
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>5.1}%", "total", rows.iter().map(|r| r.count).sum::<usize>(), if self.verdicts == 0 { 0.0 } else { 100.0 });
        };
        section(&mut out, "type", &self.by_type);
        out.push('\n');
        section(&mut out, "target rank", &self.by_bucket);
        if let Some(c) = self.chunks {
            let _ = write!(out, "\nchunks accepted {}, rejected {}\n", c.accepted, c.rejected);
        }
        if let Some(t) = self.tokens {
            let _ = writeln!(out, "tokens in {}, out {}, calls {}", t.input, t.output, t.calls);
        }
        if let Some(c) = &self.cost {
            let _ = writeln!(out, "estimated cost ({}) {}", c.model, c.usd);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Fqdn;
    use crate::psl::SuffixRules;

    fn record(name: &str, kind: SquattingType, target: &str) -> VerdictRecord {
        let fqdn = Fqdn::parse(name, SuffixRules::bundled()).unwrap();
        let v = Verdict::new(fqdn, kind, target, VerdictSource::Llm, SuffixRules::bundled()).unwrap();
        VerdictRecord::new(&v, Some(0), Some(1))
    }

    fn three() -> Vec<VerdictRecord> {
        vec![
            record("paypa1.com", SquattingType::Homo, "paypal.com"),
            record("amzaon.com", SquattingType::Typo(None), "amazon.com"),
            record("login.example-secure.net", SquattingType::Combo, "example.com"),
        ]
    }

    #[test]
    fn emits_sorted_lines() {
        let mut buf = Vec::new();
        assert_eq!(emit_verdicts(&three(), &mut buf).unwrap(), 3);
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"input":"amzaon.com","s":"","d":"amzaon","sx":"com","type":"typo","target":"amazon.com","source":"llm","chunk":0,"attempts":1}"#));
    }

    #[test]
    fn empty_and_stable() {
        let mut buf = Vec::new();
        assert_eq!(emit_verdicts(&[], &mut buf).unwrap(), 0);
        assert!(buf.is_empty());
        let (mut a, mut b) = (Vec::new(), Vec::new());
        emit_verdicts(&three(), &mut a).unwrap();
        let mut rev = three();
        rev.reverse();
        emit_verdicts(&rev, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        emit_verdicts(&three(), &mut buf).unwrap();
        let mut back = read_verdicts(buf.as_slice()).unwrap();
        let mut orig = three();
        back.sort();
        orig.sort();
        assert_eq!(back, orig);
        assert!(read_verdicts(&b"{\"input\":1}\n"[..]).is_err());
    }

    #[test]
    fn buckets() {
        assert_eq!(Bucket::of(Some(50)), Bucket::Under1k);
        assert_eq!(Bucket::of(Some(999)), Bucket::Under1k);
        assert_eq!(Bucket::of(Some(1_000)), Bucket::To10k);
        assert_eq!(Bucket::of(Some(100_000)), Bucket::To100k);
        assert_eq!(Bucket::of(Some(1_000_000)), Bucket::To1m);
        assert_eq!(Bucket::of(Some(1_000_001)), Bucket::Over1m);
        assert_eq!(Bucket::of(None), Bucket::Over1m);
    }

    #[test]
    fn summary_conserves_counts() {
        let ranks = |t: &str| match t {
            "amazon.com" => Some(50),
            "paypal.com" => Some(5_000),
            _ => None,
        };
        let s = summarize(&three(), ranks);
        assert_eq!(s.verdicts, 3);
        assert_eq!(s.by_type.iter().map(|r| r.count).sum::<usize>(), 3);
        assert_eq!(s.by_bucket.iter().map(|r| r.count).sum::<usize>(), 3);
        assert_eq!(s.by_bucket[0], CountRow { name: "<1k".into(), count: 1, percent: 33.3 });
        assert_eq!(s.by_bucket[4].count, 1);
        assert_eq!(s.by_type.len(), 8);
        let text = s.render_text();
        assert!(text.contains("total"));
        assert!(text.contains("homo"));
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent(2, 3), 66.7);
        assert_eq!(percent(1, 8), 12.5);
        assert_eq!(percent(0, 0), 0.0);
    }
}
