use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use squatwatch::ingest::{filter_active, parse_ct_stream, parse_pdns_stream, parse_zone_stream, FeedRecord, ObservationStore, ParseStats};

use super::{create, rules};
use crate::config::Config;
use crate::exit::Classify;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).with_context(|| format!("opening feed {}", path.display())).input()
}

pub fn run(config: &Config, out: &Path) -> Result<ExitCode> {
    let feeds = &config.feeds;
    let observed_at = feeds
        .observed_at
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let mut records: Vec<FeedRecord> = Vec::new();
    let mut stats = ParseStats::default();
    let mut sink = |r: FeedRecord| records.push(r);
    for path in &feeds.ct {
        let s = parse_ct_stream(open(path)?, &mut sink).with_context(|| format!("reading {}", path.display())).input()?;
        stats.merge(&s);
    }
    for path in &feeds.pdns {
        let s = parse_pdns_stream(open(path)?, &mut sink).with_context(|| format!("reading {}", path.display())).input()?;
        stats.merge(&s);
    }
    for zone in &feeds.zone {
        let s = parse_zone_stream(open(&zone.path)?, &zone.origin, Some(observed_at), &mut sink)
            .with_context(|| format!("reading {}", zone.path.display()))
            .input()?;
        stats.merge(&s);
    }
    let active = filter_active(records, rules());
    let mut store = match &feeds.store {
        Some(path) => ObservationStore::open(path).input()?,
        None => ObservationStore::in_memory(),
    };
    let new = store.observe(active.iter().map(|f| f.raw()), observed_at)?;
    let mut w = create(out)?;
    for name in &new {
        writeln!(w, "{name}")?;
    }
    w.flush()?;
    println!(
        "lines {} parsed {} skipped {} active {} new {} -> {}",
        stats.lines,
        stats.parsed,
        stats.malformed + stats.unsupported + stats.bad_names,
        active.len(),
        new.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}
