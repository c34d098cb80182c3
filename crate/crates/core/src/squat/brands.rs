use std::collections::HashMap;
use std::io::BufRead;

use crate::domain::{Fqdn, NameError};
use crate::psl::SuffixRules;

#[derive(Debug, thiserror::Error)]
pub enum BrandError {
    #[error("line {line}: expected `rank,domain`")]
    Malformed { line: usize },
    #[error("line {line}: {source}")]
    Name { line: usize, source: NameError },
    #[error("line {line}: rank {rank} is not greater than the previous rank")]
    RankOrder { line: usize, rank: u32 },
    #[error("brand list is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Brand {
    pub rank: u32,
    pub domain: Fqdn,
}

impl Brand {
    pub fn label(&self) -> &str {
        self.domain.label()
    }

    pub fn suffix(&self) -> &str {
        self.domain.suffix()
    }

    pub fn registrable(&self) -> &str {
        self.domain.raw()
    }
}

/// Ranked legitimate registrable domains, at most one per label.
#[derive(Debug, Clone, Default)]
pub struct BrandSet {
    brands: Vec<Brand>,
    by_label: HashMap<String, usize>,
    by_domain: HashMap<String, usize>,
}

/// One `rank,domain` row of a ranked list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedDomain {
    pub rank: u32,
    pub domain: String,
}

/// Reads a ranked list in `rank,domain` CSV form. Blank lines and `#`
/// comments are skipped; ranks must be strictly increasing.
pub fn read_ranked_list<R: BufRead>(reader: R) -> Result<Vec<RankedDomain>, BrandError> {
    let mut out = Vec::new();
    let mut last: Option<u32> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let no = i + 1;
        let (rank, domain) = line.split_once(',').ok_or(BrandError::Malformed { line: no })?;
        let rank: u32 = rank.trim().parse().map_err(|_| BrandError::Malformed { line: no })?;
        if last.is_some_and(|prev| rank <= prev) {
            return Err(BrandError::RankOrder { line: no, rank });
        }
        last = Some(rank);
        out.push(RankedDomain { rank, domain: domain.trim().to_string() });
    }
    Ok(out)
}

/// The small ranked sample shipped with the crate, for demos and tests.
pub fn sample_reference() -> Vec<RankedDomain> {
    read_ranked_list(include_str!("../../data/reference_sample.csv").as_bytes()).expect("bundled sample parses")
}

impl BrandSet {
    /// Builds a brand set from the first `limit` rows that parse as
    /// registrable domains. A label already taken by a better-ranked brand
    /// is skipped.
    pub fn from_ranked(rows: &[RankedDomain], limit: usize, rules: &SuffixRules) -> Result<BrandSet, BrandError> {
        let mut set = BrandSet::default();
        for (i, row) in rows.iter().enumerate() {
            if set.len() >= limit {
                break;
            }
            let domain = Fqdn::parse(&row.domain, rules).map_err(|source| BrandError::Name { line: i + 1, source })?;
            if !domain.is_registrable() || set.by_label.contains_key(domain.label()) {
                continue;
            }
            set.push(Brand { rank: row.rank, domain });
        }
        if set.is_empty() {
            return Err(BrandError::Empty);
        }
        Ok(set)
    }

    /// Convenience constructor for literal lists; ranks are 1-based positions.
    pub fn from_domains<S: AsRef<str>>(domains: &[S], rules: &SuffixRules) -> Result<BrandSet, BrandError> {
        let rows: Vec<RankedDomain> = domains
            .iter()
            .enumerate()
            .map(|(i, d)| RankedDomain { rank: i as u32 + 1, domain: d.as_ref().to_string() })
            .collect();
        BrandSet::from_ranked(&rows, usize::MAX, rules)
    }

    fn push(&mut self, brand: Brand) {
        let idx = self.brands.len();
        self.by_label.insert(brand.label().to_string(), idx);
        self.by_domain.insert(brand.registrable().to_string(), idx);
        self.brands.push(brand);
    }

    pub fn len(&self) -> usize {
        self.brands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.brands.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Brand> {
        self.brands.iter()
    }

    pub fn get(&self, idx: usize) -> &Brand {
        &self.brands[idx]
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).copied()
    }

    pub fn index_of_domain(&self, registrable: &str) -> Option<usize> {
        self.by_domain.get(registrable).copied()
    }

    pub fn contains_domain(&self, registrable: &str) -> bool {
        self.by_domain.contains_key(registrable)
    }

    /// The best-ranked `n` brands.
    pub fn top(&self, n: usize) -> BrandSet {
        let mut set = BrandSet::default();
        for b in self.brands.iter().take(n) {
            set.push(b.clone());
        }
        set
    }
}
