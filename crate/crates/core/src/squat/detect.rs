//! Rule-based detection against a brand set.
//!
//! [`Detector::baseline`] mirrors the single-technique detectors: variant
//! membership, TLD swap, level embedding and combination. It never reports a
//! hybrid. [`Detector::extended`] first looks for names combining two or more
//! techniques and otherwise defers to the baseline.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::domain::{decode_label, normalize, Fqdn, SquattingType, Verdict, VerdictError, VerdictSource};
use crate::psl::SuffixRules;

use super::brands::BrandSet;
use super::generate::{gen_bit, gen_homo, gen_sound, gen_typo_all};
use super::tables::GeneratorTables;

/// Shortest brand label a combination match may contain.
pub const MIN_COMBO_LABEL: usize = 4;

/// Fixed tie-breaking order between techniques.
pub fn precedence(kind: SquattingType) -> u8 {
    match kind {
        SquattingType::Typo(_) => 0,
        SquattingType::Bit => 1,
        SquattingType::Homo => 2,
        SquattingType::Sound => 3,
        SquattingType::Tld => 4,
        SquattingType::Level => 5,
        SquattingType::Combo => 6,
        SquattingType::Hybrid => 7,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantHit {
    pub brand: usize,
    pub kind: SquattingType,
}

/// Label-level variants of every brand (typo, bit, homograph, sound), keyed
/// by the variant label.
#[derive(Debug, Clone, Default)]
pub struct VariantIndex {
    hits: HashMap<String, Vec<VariantHit>>,
}

impl VariantIndex {
    pub fn build(brands: &BrandSet, tables: &GeneratorTables) -> VariantIndex {
        let per_brand: Vec<Vec<(String, VariantHit)>> = (0..brands.len())
            .into_par_iter()
            .map(|idx| {
                let label = brands.get(idx).label();
                let hit = |kind| VariantHit { brand: idx, kind };
                let mut out: Vec<(String, VariantHit)> = gen_typo_all(label, &tables.keyboard)
                    .into_iter()
                    .map(|(v, sub)| (v, hit(SquattingType::Typo(Some(sub)))))
                    .collect();
                out.extend(gen_bit(label).into_iter().map(|v| (v, hit(SquattingType::Bit))));
                out.extend(gen_homo(label, &tables.confusables).into_iter().map(|v| (v, hit(SquattingType::Homo))));
                out.extend(gen_sound(label, &tables.homophones).into_iter().map(|v| (v, hit(SquattingType::Sound))));
                out
            })
            .collect();
        let mut hits: HashMap<String, Vec<VariantHit>> = HashMap::new();
        for (variant, hit) in per_brand.into_iter().flatten() {
            hits.entry(variant).or_default().push(hit);
        }
        for list in hits.values_mut() {
            list.sort_by_key(|h| (precedence(h.kind), brands.get(h.brand).rank, h.kind));
            list.dedup_by(|a, b| a.brand == b.brand && a.kind.same_kind(b.kind));
        }
        VariantIndex { hits }
    }

    /// Hits for `label`, best first.
    pub fn lookup(&self, label: &str) -> &[VariantHit] {
        self.hits.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Combination match: the brand whose label `d` contains, and the leftover
/// text. Prefers the longest contained label, then the better rank.
pub fn detect_combo(fqdn: &Fqdn, brands: &BrandSet) -> Option<(usize, String)> {
    combo_in_label(fqdn.label(), brands)
}

fn combo_in_label(label: &str, brands: &BrandSet) -> Option<(usize, String)> {
    if brands.index_of_label(label).is_some() {
        return None;
    }
    let n = label.len();
    for len in (MIN_COMBO_LABEL..n).rev() {
        let mut best: Option<(u32, usize, usize)> = None;
        for start in 0..=n - len {
            let Some(piece) = label.get(start..start + len) else { continue };
            if let Some(idx) = brands.index_of_label(piece) {
                let rank = brands.get(idx).rank;
                if best.is_none_or(|(r, _, _)| rank < r) {
                    best = Some((rank, idx, start));
                }
            }
        }
        if let Some((_, idx, start)) = best {
            let residue = [&label[..start], &label[start + len..]]
                .iter()
                .map(|p| p.trim_matches('-'))
                .filter(|p| !p.is_empty())
                .collect::<Vec<_>>()
                .join("-");
            if !residue.is_empty() {
                return Some((idx, residue));
            }
        }
    }
    None
}

/// Level match: a brand's registrable name appearing as whole labels inside
/// the subdomain. Best rank wins.
pub fn detect_level(fqdn: &Fqdn, brands: &BrandSet) -> Option<usize> {
    if fqdn.subdomain().is_empty() || brands.contains_domain(&fqdn.registrable()) {
        return None;
    }
    let labels: Vec<&str> = fqdn.subdomain().split('.').collect();
    let mut best: Option<usize> = None;
    for start in 0..labels.len() {
        for end in start + 2..=labels.len() {
            if let Some(idx) = brands.index_of_domain(&labels[start..end].join(".")) {
                if best.is_none_or(|b| brands.get(idx).rank < brands.get(b).rank) {
                    best = Some(idx);
                }
            }
        }
    }
    best
}

/// One detection: technique, brand index and, for hybrids, the combined
/// techniques.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub kind: SquattingType,
    pub brand: usize,
    pub techniques: Vec<SquattingType>,
}

impl Detection {
    fn single(kind: SquattingType, brand: usize) -> Detection {
        Detection { kind, brand, techniques: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    Domain,
    Subdomain,
}

/// Detectors bound to one brand set.
#[derive(Debug, Clone)]
pub struct Detector {
    brands: BrandSet,
    index: VariantIndex,
}

impl Detector {
    pub fn new(brands: BrandSet, tables: &GeneratorTables) -> Detector {
        let index = VariantIndex::build(&brands, tables);
        Detector { brands, index }
    }

    pub fn brands(&self) -> &BrandSet {
        &self.brands
    }

    pub fn index(&self) -> &VariantIndex {
        &self.index
    }

    /// Single-technique detection in the fixed precedence order.
    pub fn baseline(&self, fqdn: &Fqdn) -> Option<Detection> {
        if self.brands.contains_domain(&fqdn.registrable()) {
            return None;
        }
        let same_suffix = self
            .index
            .lookup(fqdn.label())
            .iter()
            .find(|h| self.brands.get(h.brand).suffix() == fqdn.suffix());
        if let Some(hit) = same_suffix {
            return Some(Detection::single(hit.kind, hit.brand));
        }
        if let Some(idx) = self.brands.index_of_label(fqdn.label()) {
            return Some(Detection::single(SquattingType::Tld, idx));
        }
        if let Some(idx) = detect_level(fqdn, &self.brands) {
            return Some(Detection::single(SquattingType::Level, idx));
        }
        detect_combo(fqdn, &self.brands).map(|(idx, _)| Detection::single(SquattingType::Combo, idx))
    }

    /// Interpretations of one label as a brand imitation, as
    /// `(brand, techniques)`.
    fn token_candidates(&self, token: &str) -> Vec<(usize, Vec<SquattingType>)> {
        let mut out = Vec::new();
        if let Some(idx) = self.brands.index_of_label(token) {
            out.push((idx, Vec::new()));
            return out;
        }
        if let Some(hit) = self.index.lookup(token).first() {
            out.push((hit.brand, vec![hit.kind]));
        }
        if let Some((idx, _)) = combo_in_label(token, &self.brands) {
            out.push((idx, vec![SquattingType::Combo]));
        }
        let text = decode_label(token);
        if text.contains('-') {
            for part in text.split('-').filter(|p| !p.is_empty()) {
                let Ok(part) = normalize(part) else { continue };
                if let Some(hit) = self.index.lookup(&part).first() {
                    out.push((hit.brand, vec![hit.kind, SquattingType::Combo]));
                }
            }
        }
        out
    }

    /// Looks for a name combining at least two techniques.
    pub fn analyze_hybrid(&self, fqdn: &Fqdn) -> Option<Detection> {
        if self.brands.contains_domain(&fqdn.registrable()) {
            return None;
        }
        let tokens = std::iter::once((fqdn.label(), Position::Domain)).chain(
            fqdn.subdomain()
                .split('.')
                .filter(|l| !l.is_empty())
                .map(|l| (l, Position::Subdomain)),
        );
        let mut best: Option<(usize, u32, Detection)> = None;
        for (token, position) in tokens {
            for (idx, mut techniques) in self.token_candidates(token) {
                let brand = self.brands.get(idx);
                match position {
                    Position::Domain if brand.suffix() != fqdn.suffix() => techniques.push(SquattingType::Tld),
                    Position::Subdomain => techniques.push(SquattingType::Level),
                    _ => {}
                }
                let mut distinct: Vec<SquattingType> = Vec::new();
                for t in techniques {
                    if !distinct.iter().any(|d| d.same_kind(t)) {
                        distinct.push(t);
                    }
                }
                if distinct.len() < 2 {
                    continue;
                }
                let key = (distinct.len(), brand.rank);
                let better = best
                    .as_ref()
                    .is_none_or(|(n, r, _)| key.0 > *n || (key.0 == *n && key.1 < *r));
                if better {
                    best = Some((
                        key.0,
                        key.1,
                        Detection { kind: SquattingType::Hybrid, brand: idx, techniques: distinct },
                    ));
                }
            }
        }
        best.map(|(_, _, d)| d)
    }

    /// Hybrid analysis first, then the baseline.
    pub fn extended(&self, fqdn: &Fqdn) -> Option<Detection> {
        self.analyze_hybrid(fqdn).or_else(|| self.baseline(fqdn))
    }

    pub fn to_verdict(&self, fqdn: &Fqdn, det: &Detection, source: VerdictSource, rules: &SuffixRules) -> Result<Verdict, VerdictError> {
        let target = self.brands.get(det.brand).registrable().to_string();
        let v = Verdict::new(fqdn.clone(), det.kind, &target, source, rules)?;
        if det.kind == SquattingType::Hybrid {
            v.with_techniques(det.techniques.clone())
        } else {
            Ok(v)
        }
    }

    /// Baseline verdict for `fqdn`.
    pub fn baseline_detect(&self, fqdn: &Fqdn, rules: &SuffixRules) -> Option<Verdict> {
        let det = self.baseline(fqdn)?;
        self.to_verdict(fqdn, &det, VerdictSource::Baseline, rules).ok()
    }
}
