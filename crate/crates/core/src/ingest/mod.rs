//! Feed ingestion: certificate-transparency lines, passive-DNS rows and zone
//! master files, the active-use filter and the newly-observed set.
//!
//! Every parser consumes a line stream, hands records to a sink and returns
//! per-line statistics. A broken line is counted, never fatal.

mod ct;
mod filter;
mod pdns;
mod store;
mod zone;

use std::fmt;

pub use ct::{parse_ct, parse_ct_stream};
pub use filter::{filter_active, merge_evidence};
pub use pdns::{parse_pdns, parse_pdns_stream};
pub use store::{new_observed, ObservationStore, StoreError};
pub use zone::{parse_zone, parse_zone_stream};

/// Where a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeedSource {
    CtLog,
    Pdns,
    Zone,
}

/// Record kinds that count as evidence of use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RrType {
    Ns,
    A,
    Aaaa,
}

impl RrType {
    pub fn from_name(name: &str) -> Option<RrType> {
        match name.to_ascii_uppercase().as_str() {
            "NS" => Some(RrType::Ns),
            "A" => Some(RrType::A),
            "AAAA" => Some(RrType::Aaaa),
            _ => None,
        }
    }

    fn bit(self) -> u8 {
        match self {
            RrType::Ns => 1,
            RrType::A => 2,
            RrType::Aaaa => 4,
        }
    }
}

/// A set of [`RrType`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RrSet(u8);

impl RrSet {
    pub const EMPTY: RrSet = RrSet(0);

    pub fn of(types: &[RrType]) -> RrSet {
        types.iter().fold(RrSet::EMPTY, |s, &t| s.with(t))
    }

    pub fn with(self, t: RrType) -> RrSet {
        RrSet(self.0 | t.bit())
    }

    pub fn union(self, other: RrSet) -> RrSet {
        RrSet(self.0 | other.0)
    }

    pub fn contains(self, t: RrType) -> bool {
        self.0 & t.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn has_address(self) -> bool {
        self.contains(RrType::A) || self.contains(RrType::Aaaa)
    }
}

impl fmt::Display for RrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(RrType::Ns, "NS"), (RrType::A, "A"), (RrType::Aaaa, "AAAA")]
            .iter()
            .filter(|(t, _)| self.contains(*t))
            .map(|(_, n)| *n)
            .collect();
        write!(f, "{{{}}}", names.join(", "))
    }
}

/// One observation of a name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedRecord {
    /// Normalized name.
    pub fqdn: String,
    pub source: FeedSource,
    pub rr_types: RrSet,
    /// Seconds since the epoch, UTC, when the feed carries a time.
    pub observed_at: Option<u64>,
}

/// Per-stream line accounting. Every consumed line lands in exactly one of
/// `parsed`, `malformed`, `unsupported`, `ignored` or `bad_names`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseStats {
    pub lines: usize,
    /// Lines that produced at least one record.
    pub parsed: usize,
    pub malformed: usize,
    /// Well-formed lines of a record kind that is not collected.
    pub unsupported: usize,
    /// Blank lines, comments and directives.
    pub ignored: usize,
    /// Lines whose names all failed normalization.
    pub bad_names: usize,
    pub records: usize,
}

impl ParseStats {
    pub fn accounted(&self) -> usize {
        self.parsed + self.malformed + self.unsupported + self.ignored + self.bad_names
    }

    pub fn merge(&mut self, other: &ParseStats) {
        self.lines += other.lines;
        self.parsed += other.parsed;
        self.malformed += other.malformed;
        self.unsupported += other.unsupported;
        self.ignored += other.ignored;
        self.bad_names += other.bad_names;
        self.records += other.records;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LineOutcome {
    Parsed(usize),
    Malformed,
    Unsupported,
    Ignored,
    BadName,
}

impl ParseStats {
    pub(crate) fn count(&mut self, outcome: LineOutcome) {
        self.lines += 1;
        match outcome {
            LineOutcome::Parsed(n) => {
                self.parsed += 1;
                self.records += n;
            }
            LineOutcome::Malformed => self.malformed += 1,
            LineOutcome::Unsupported => self.unsupported += 1,
            LineOutcome::Ignored => self.ignored += 1,
            LineOutcome::BadName => self.bad_names += 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rr_set_ops() {
        let s = RrSet::of(&[RrType::Ns]).with(RrType::Aaaa);
        assert!(s.contains(RrType::Ns) && s.has_address() && !s.contains(RrType::A));
        assert_eq!(s.to_string(), "{NS, AAAA}");
        assert_eq!(RrType::from_name("aaaa"), Some(RrType::Aaaa));
        assert_eq!(RrType::from_name("TXT"), None);
    }

    proptest::proptest! {
        #[test]
        fn every_line_is_accounted(text in "([ -~\t()\";]{0,40}\n){0,12}") {
            let ct = parse_ct(text.as_bytes()).unwrap().1;
            let pdns = parse_pdns(text.as_bytes()).unwrap().1;
            let zone = parse_zone(text.as_bytes(), "com.", None).unwrap().1;
            let lines = text.lines().count();
            for stats in [ct, pdns, zone] {
                proptest::prop_assert_eq!(stats.lines, lines);
                proptest::prop_assert_eq!(stats.accounted(), lines);
            }
        }

        #[test]
        fn filter_ignores_record_order(
            picks in proptest::collection::vec((0usize..6, 0usize..3), 0..40),
            seed in proptest::prelude::any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            const NAMES: [&str; 6] = ["a.com", "www.a.com", "b.com", "x.b.com", "c.co.uk", "co.uk"];
            const TYPES: [RrType; 3] = [RrType::Ns, RrType::A, RrType::Aaaa];
            let recs: Vec<FeedRecord> = picks
                .iter()
                .map(|&(n, t)| FeedRecord {
                    fqdn: NAMES[n].to_string(),
                    source: FeedSource::Zone,
                    rr_types: RrSet::of(&[TYPES[t]]),
                    observed_at: None,
                })
                .collect();
            let mut shuffled = recs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let rules = crate::psl::SuffixRules::bundled();
            proptest::prop_assert_eq!(filter_active(recs, rules), filter_active(shuffled, rules));
        }
    }
}
