use serde::Serialize;

use crate::dnx::{Chunk, DomainPair};
use crate::domain::Fqdn;
use crate::squat::Detector;

use super::TrvError;

/// How a control entry must be classified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "expected", rename_all = "lowercase")]
pub enum Expected {
    Benign,
    Squat { target: String },
}

/// A control name placed into every chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MustPassEntry {
    pub fqdn: Fqdn,
    pub expected: Expected,
    /// Registrable domain of the brand the entry was made from.
    pub provenance: String,
}

/// Swaps the two characters around the middle of `label`, or `None` when
/// they are equal or the label is an IDN.
fn middle_swap(label: &str) -> Option<String> {
    if label.starts_with("xn--") || label.len() < 2 || !label.is_ascii() {
        return None;
    }
    let mut b = label.as_bytes().to_vec();
    let i = (b.len() - 1) / 2;
    if b[i] == b[i + 1] {
        return None;
    }
    b.swap(i, i + 1);
    String::from_utf8(b).ok()
}

/// Brands whose middle-swap permutation the detector attributes back to
/// them, in rank order.
#[derive(Debug, Clone)]
pub struct MustPassPool {
    entries: Vec<(Fqdn, Fqdn)>,
}

impl MustPassPool {
    /// Considers the `top` highest-ranked brands of `detector`.
    pub fn build(detector: &Detector, top: usize) -> Result<MustPassPool, TrvError> {
        let mut entries = Vec::new();
        for brand in detector.brands().iter().take(top) {
            let Some(swapped) = middle_swap(brand.label()) else { continue };
            let Ok(squat) = Fqdn::from_parts("", &swapped, brand.suffix()) else { continue };
            let attributed = |d: Option<crate::squat::Detection>| {
                d.is_some_and(|d| detector.brands().get(d.brand).registrable() == brand.registrable())
            };
            if attributed(detector.baseline(&squat)) && attributed(detector.extended(&squat)) {
                entries.push((brand.domain.clone(), squat));
            }
        }
        if entries.len() < 4 {
            return Err(TrvError::MustPassPool { eligible: entries.len() });
        }
        Ok(MustPassPool { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Two benign and two squat entries, rotating through the pool with
    /// `chunk_id`. The squats come from different brands than the benign
    /// entries.
    pub fn select(&self, chunk_id: usize) -> [MustPassEntry; 4] {
        let n = self.entries.len();
        let pick = |k: usize| &self.entries[(chunk_id + k) % n];
        let benign = |k: usize| {
            let (brand, _) = pick(k);
            MustPassEntry { fqdn: brand.clone(), expected: Expected::Benign, provenance: brand.raw().to_string() }
        };
        let squat = |k: usize| {
            let (brand, squat) = pick(k);
            MustPassEntry {
                fqdn: squat.clone(),
                expected: Expected::Squat { target: brand.raw().to_string() },
                provenance: brand.raw().to_string(),
            }
        };
        [benign(0), benign(1), squat(2), squat(3)]
    }
}

/// One row of the list sent to the model.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentedEntry {
    Pair(DomainPair),
    MustPass(MustPassEntry),
}

impl AugmentedEntry {
    pub fn fqdn(&self) -> &Fqdn {
        match self {
            AugmentedEntry::Pair(p) => &p.input,
            AugmentedEntry::MustPass(m) => &m.fqdn,
        }
    }
}

/// A chunk with its control entries woven in.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub chunk_id: usize,
    pub entries: Vec<AugmentedEntry>,
    /// 1-indexed positions of the control entries.
    pub injected: Vec<usize>,
}

impl Augmented {
    pub fn must_pass(&self) -> impl Iterator<Item = &MustPassEntry> {
        self.entries.iter().filter_map(|e| match e {
            AugmentedEntry::MustPass(m) => Some(m),
            AugmentedEntry::Pair(_) => None,
        })
    }

    /// The original pairs, in order.
    pub fn strip(&self) -> Vec<DomainPair> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                AugmentedEntry::Pair(p) => Some(p.clone()),
                AugmentedEntry::MustPass(_) => None,
            })
            .collect()
    }
}

/// 1-indexed positions of the control entries for a chunk of `n` pairs:
/// `k * ceil(n / 4) + 1` for k = 1..4.
pub fn injection_positions(n: usize) -> [usize; 4] {
    let block = n.div_ceil(4).max(1);
    [1, 2, 3, 4].map(|k| k * block + 1)
}

pub fn inject(chunk: &Chunk, entries: &[MustPassEntry; 4]) -> Augmented {
    let positions = injection_positions(chunk.pairs.len());
    let total = chunk.pairs.len() + entries.len();
    let mut pairs = chunk.pairs.iter();
    let mut controls = entries.iter();
    let mut out = Vec::with_capacity(total);
    for pos in 1..=total {
        let entry = if positions.contains(&pos) {
            controls.next().map(|m| AugmentedEntry::MustPass(m.clone()))
        } else {
            pairs.next().map(|p| AugmentedEntry::Pair(p.clone()))
        };
        out.push(entry.expect("positions fit the augmented length"));
    }
    Augmented { chunk_id: chunk.id, entries: out, injected: positions.to_vec() }
}
