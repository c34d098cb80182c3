use std::collections::BTreeMap;

use super::{FeedRecord, RrSet, RrType};
use crate::domain::Fqdn;
use crate::psl::SuffixRules;

/// Union of record-type evidence per normalized name, across all sources.
pub fn merge_evidence<I: IntoIterator<Item = FeedRecord>>(records: I) -> BTreeMap<String, RrSet> {
    let mut merged: BTreeMap<String, RrSet> = BTreeMap::new();
    for r in records {
        let e = merged.entry(r.fqdn).or_default();
        *e = e.union(r.rr_types);
    }
    merged
}

/// Names in active use: an address record on the name itself and an NS
/// record on the name or on an ancestor down to its registrable domain.
/// Names that are bare public suffixes are dropped. Sorted by name.
pub fn filter_active<I: IntoIterator<Item = FeedRecord>>(records: I, rules: &SuffixRules) -> Vec<Fqdn> {
    let merged = merge_evidence(records);
    let has_ns = |name: &str| merged.get(name).is_some_and(|s| s.contains(RrType::Ns));
    merged
        .iter()
        .filter(|(_, rr)| rr.has_address())
        .filter_map(|(name, _)| Fqdn::parse(name, rules).ok())
        .filter(|f| {
            let registrable_len = f.registrable().len();
            let mut name = f.raw();
            loop {
                if has_ns(name) {
                    return true;
                }
                match name.split_once('.') {
                    Some((_, parent)) if parent.len() >= registrable_len => name = parent,
                    _ => return false,
                }
            }
        })
        .collect()
}
