use std::collections::BTreeSet;
use std::io::BufRead;

use serde::Deserialize;

use super::{FeedRecord, FeedSource, LineOutcome, ParseStats, RrSet};
use crate::domain::normalize;

#[derive(Deserialize)]
struct CtLine {
    all_domains: Vec<String>,
    #[serde(default)]
    timestamp: Option<f64>,
}

fn parse_line(line: &str, sink: &mut dyn FnMut(FeedRecord)) -> LineOutcome {
    if line.trim().is_empty() {
        return LineOutcome::Ignored;
    }
    let Ok(entry) = serde_json::from_str::<CtLine>(line) else {
        return LineOutcome::Malformed;
    };
    let observed_at = entry.timestamp.filter(|t| t.is_finite() && *t >= 0.0).map(|t| t as u64);
    let names: BTreeSet<String> = entry
        .all_domains
        .iter()
        .filter_map(|raw| normalize(raw.strip_prefix("*.").unwrap_or(raw)).ok())
        .collect();
    if names.is_empty() {
        return if entry.all_domains.is_empty() { LineOutcome::Malformed } else { LineOutcome::BadName };
    }
    let n = names.len();
    for fqdn in names {
        sink(FeedRecord { fqdn, source: FeedSource::CtLog, rr_types: RrSet::EMPTY, observed_at });
    }
    LineOutcome::Parsed(n)
}

/// Certificate-transparency JSON lines, one object per certificate with
/// `all_domains` and `timestamp`. Wildcard prefixes are stripped; CT
/// carries no record-type evidence.
pub fn parse_ct_stream<R: BufRead>(reader: R, mut sink: impl FnMut(FeedRecord)) -> std::io::Result<ParseStats> {
    let mut stats = ParseStats::default();
    for line in reader.lines() {
        stats.count(parse_line(&line?, &mut sink));
    }
    Ok(stats)
}

pub fn parse_ct<R: BufRead>(reader: R) -> std::io::Result<(Vec<FeedRecord>, ParseStats)> {
    let mut out = Vec::new();
    let stats = parse_ct_stream(reader, |r| out.push(r))?;
    Ok((out, stats))
}
