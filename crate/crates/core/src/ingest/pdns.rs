use std::io::BufRead;
use std::net::{Ipv4Addr, Ipv6Addr};

use super::{FeedRecord, FeedSource, LineOutcome, ParseStats, RrSet, RrType};
use crate::domain::normalize;

fn parse_line(line: &str, sink: &mut dyn FnMut(FeedRecord)) -> LineOutcome {
    if line.trim().is_empty() || line.starts_with('#') {
        return LineOutcome::Ignored;
    }
    let cols: Vec<&str> = line.split('\t').collect();
    let [name, rrtype, rdata, ts] = cols[..] else {
        return LineOutcome::Malformed;
    };
    let Ok(ts) = ts.trim().parse::<u64>() else {
        return LineOutcome::Malformed;
    };
    if rdata.trim().is_empty() || rrtype.trim().is_empty() {
        return LineOutcome::Malformed;
    }
    let Some(kind) = RrType::from_name(rrtype.trim()) else {
        return LineOutcome::Unsupported;
    };
    let rdata_ok = match kind {
        RrType::A => rdata.trim().parse::<Ipv4Addr>().is_ok(),
        RrType::Aaaa => rdata.trim().parse::<Ipv6Addr>().is_ok(),
        RrType::Ns => normalize(rdata.trim()).is_ok(),
    };
    if !rdata_ok {
        return LineOutcome::Malformed;
    }
    let Ok(fqdn) = normalize(name.trim()) else {
        return LineOutcome::BadName;
    };
    sink(FeedRecord { fqdn, source: FeedSource::Pdns, rr_types: RrSet::of(&[kind]), observed_at: Some(ts) });
    LineOutcome::Parsed(1)
}

/// Passive-DNS rows: `fqdn<TAB>rrtype<TAB>rdata<TAB>timestamp`.
pub fn parse_pdns_stream<R: BufRead>(reader: R, mut sink: impl FnMut(FeedRecord)) -> std::io::Result<ParseStats> {
    let mut stats = ParseStats::default();
    for line in reader.lines() {
        stats.count(parse_line(&line?, &mut sink));
    }
    Ok(stats)
}

pub fn parse_pdns<R: BufRead>(reader: R) -> std::io::Result<(Vec<FeedRecord>, ParseStats)> {
    let mut out = Vec::new();
    let stats = parse_pdns_stream(reader, |r| out.push(r))?;
    Ok((out, stats))
}
