//! Public-suffix rule sets.
//!
//! Rules are read from the standard list text format: one rule per line,
//! `//` comments, `*.` wildcard rules and `!` exception rules. Matching
//! follows the usual algorithm: an exception rule wins, otherwise the rule
//! with the most labels; a name with no matching rule falls back to its last
//! label (the implicit `*` rule), which keeps unlisted TLDs from zone feeds
//! usable.

use std::collections::HashSet;
use std::sync::OnceLock;

const BUNDLED: &str = include_str!("../data/public_suffix_list.dat");

/// Which sections of the list to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sections {
    /// Registry-operated suffixes only (the `ICANN DOMAINS` section).
    #[default]
    Icann,
    /// Registry and privately operated suffixes.
    All,
}

/// An immutable set of public-suffix rules.
#[derive(Debug, Clone, Default)]
pub struct SuffixRules {
    normal: HashSet<String>,
    /// Stored without the leading `*.`.
    wildcard: HashSet<String>,
    /// Stored without the leading `!`.
    exception: HashSet<String>,
}

impl SuffixRules {
    /// Parses rules from list text.
    pub fn parse(text: &str, sections: Sections) -> Self {
        let mut rules = SuffixRules::default();
        for line in text.lines() {
            let line = line.trim();
            if line.starts_with("// ===BEGIN PRIVATE DOMAINS===") && sections == Sections::Icann {
                break;
            }
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            // A rule ends at the first whitespace.
            let rule = line.split_whitespace().next().unwrap_or_default();
            let (kind, body) = if let Some(body) = rule.strip_prefix('!') {
                (RuleKind::Exception, body)
            } else if let Some(body) = rule.strip_prefix("*.") {
                (RuleKind::Wildcard, body)
            } else {
                (RuleKind::Normal, rule)
            };
            let Ok(ascii) = crate::domain::normalize(body) else {
                continue;
            };
            match kind {
                RuleKind::Normal => rules.normal.insert(ascii),
                RuleKind::Wildcard => rules.wildcard.insert(ascii),
                RuleKind::Exception => rules.exception.insert(ascii),
            };
        }
        rules
    }

    /// The bundled snapshot, registry section only.
    pub fn bundled() -> &'static SuffixRules {
        static RULES: OnceLock<SuffixRules> = OnceLock::new();
        RULES.get_or_init(|| SuffixRules::parse(BUNDLED, Sections::Icann))
    }

    /// Number of rules of all kinds.
    pub fn len(&self) -> usize {
        self.normal.len() + self.wildcard.len() + self.exception.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `suffix` is listed verbatim as a normal rule.
    pub fn is_listed(&self, suffix: &str) -> bool {
        self.normal.contains(suffix)
    }

    /// Number of trailing labels of `name` that form its public suffix.
    ///
    /// `name` must already be normalized. Always at least 1 for a non-empty
    /// name.
    pub fn suffix_labels(&self, name: &str) -> usize {
        let labels: Vec<&str> = name.split('.').collect();
        let n = labels.len();
        let tail = |start: usize| labels[start..].join(".");
        // An exception rule prevails over every other match.
        for start in 0..n {
            if self.exception.contains(&tail(start)) {
                return n - start - 1;
            }
        }
        // Otherwise the longest normal or wildcard match; the scan runs from
        // the longest candidate down, so the first hit wins.
        for start in 0..n {
            let wildcard_hit = start + 1 < n && self.wildcard.contains(&tail(start + 1));
            if wildcard_hit || self.normal.contains(&tail(start)) {
                return n - start;
            }
        }
        1
    }

    /// The public suffix of a normalized name.
    pub fn suffix_of<'a>(&self, name: &'a str) -> &'a str {
        let keep = self.suffix_labels(name);
        let mut idx = name.len();
        for _ in 0..keep {
            match name[..idx].rfind('.') {
                Some(dot) => idx = dot,
                None => return name,
            }
        }
        &name[idx + 1..]
    }

    /// All rules as `(kind, text)` pairs, for diagnostics and tests.
    pub fn rules(&self) -> impl Iterator<Item = (RuleKind, &str)> {
        self.normal
            .iter()
            .map(|r| (RuleKind::Normal, r.as_str()))
            .chain(self.wildcard.iter().map(|r| (RuleKind::Wildcard, r.as_str())))
            .chain(self.exception.iter().map(|r| (RuleKind::Exception, r.as_str())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Normal,
    Wildcard,
    Exception,
}
