//! Variant generators, one per squatting technique.
//!
//! Every generator returns labels (or names) in canonical ASCII form. A
//! variant that equals its input or is not a valid hostname label is dropped.

use std::collections::BTreeSet;

use crate::domain::{decode_label, is_hostname_label, normalize, TypoSubtype};

use super::brands::Brand;
use super::tables::{ConfusableTable, HomophoneTable, Keyboard};

/// Canonical ASCII form of a candidate label, if it is a valid hostname
/// label distinct from `original`.
fn finish(candidate: &str, original: &str) -> Option<String> {
    let encoded = normalize(candidate).ok()?;
    (!encoded.contains('.') && is_hostname_label(&encoded) && encoded != original).then_some(encoded)
}

fn collect(original: &str, candidates: impl Iterator<Item = String>) -> BTreeSet<String> {
    candidates.filter_map(|c| finish(&c, original)).collect()
}

/// Typing-error variants of one kind. `MissingDot` yields the label a user
/// reaches by skipping the dot after a leading `www`.
pub fn gen_typo(label: &str, subtype: TypoSubtype, keyboard: &Keyboard) -> BTreeSet<String> {
    let chars: Vec<char> = decode_label(label).chars().collect();
    let n = chars.len();
    let build = |parts: &[&[char]]| -> String { parts.iter().flat_map(|p| p.iter()).collect() };
    let candidates: Vec<String> = match subtype {
        TypoSubtype::MissingDot => {
            if label.starts_with("www") {
                Vec::new()
            } else {
                vec![format!("www{label}")]
            }
        }
        TypoSubtype::Omission => (0..n).map(|i| build(&[&chars[..i], &chars[i + 1..]])).collect(),
        TypoSubtype::Permutation => (0..n.saturating_sub(1))
            .filter(|&i| chars[i] != chars[i + 1])
            .map(|i| {
                let mut v = chars.clone();
                v.swap(i, i + 1);
                v.into_iter().collect()
            })
            .collect(),
        TypoSubtype::Replacement => (0..n)
            .flat_map(|i| {
                keyboard
                    .neighbors(chars[i])
                    .iter()
                    .map(|&c| build(&[&chars[..i], &[c], &chars[i + 1..]]))
                    .collect::<Vec<_>>()
            })
            .collect(),
        TypoSubtype::Insertion => (0..n)
            .flat_map(|i| {
                let mut keys: Vec<char> = keyboard.neighbors(chars[i]).to_vec();
                keys.push(chars[i]);
                keys.into_iter()
                    .flat_map(|c| {
                        [
                            build(&[&chars[..i], &[c], &chars[i..]]),
                            build(&[&chars[..=i], &[c], &chars[i + 1..]]),
                        ]
                    })
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    collect(label, candidates.into_iter())
}

/// All typing-error variants, tagged with the first subtype producing each.
pub fn gen_typo_all(label: &str, keyboard: &Keyboard) -> Vec<(String, TypoSubtype)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for sub in TypoSubtype::ALL {
        for v in gen_typo(label, sub, keyboard) {
            if seen.insert(v.clone()) {
                out.push((v, sub));
            }
        }
    }
    out
}

/// Single bit-flip variants of an ASCII label.
pub fn gen_bit(label: &str) -> BTreeSet<String> {
    if !label.is_ascii() {
        return BTreeSet::new();
    }
    let bytes = label.as_bytes();
    let mut out = BTreeSet::new();
    for (i, &b) in bytes.iter().enumerate() {
        for bit in 0..8 {
            let flipped = b ^ (1 << bit);
            if !(flipped.is_ascii_lowercase() || flipped.is_ascii_digit() || flipped == b'-') {
                continue;
            }
            let mut v = bytes.to_vec();
            v[i] = flipped;
            let v = String::from_utf8(v).expect("ascii");
            if is_hostname_label(&v) {
                out.insert(v);
            }
        }
    }
    out
}

/// Variants replacing one occurrence of a confusable sequence.
pub fn gen_homo(label: &str, table: &ConfusableTable) -> BTreeSet<String> {
    let text = decode_label(label);
    let mut candidates = Vec::new();
    for (from, to) in table.mappings() {
        for (at, _) in text.match_indices(from.as_str()) {
            candidates.push(format!("{}{}{}", &text[..at], to, &text[at + from.len()..]));
        }
    }
    collect(label, candidates.into_iter())
}

/// Variants replacing one sounds-alike token, scanning left to right and
/// taking the longest token at each position.
pub fn gen_sound(label: &str, homophones: &HomophoneTable) -> BTreeSet<String> {
    let text = decode_label(label);
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < text.len() {
        match homophones.longest_match(&text[i..]) {
            Some((token, replacements)) => {
                for rep in replacements {
                    candidates.push(format!("{}{}{}", &text[..i], rep, &text[i + token.len()..]));
                }
                i += token.len();
            }
            None => i += text[i..].chars().next().map_or(1, char::len_utf8),
        }
    }
    collect(label, candidates.into_iter())
}

/// The brand label under every other suffix in `tlds`.
pub fn gen_tld(brand: &Brand, tlds: &[String]) -> BTreeSet<String> {
    tlds.iter()
        .filter(|t| t.as_str() != brand.suffix())
        .map(|t| format!("{}.{}", brand.label(), t))
        .collect()
}

/// The brand label joined with each keyword, before or after, with and
/// without a hyphen.
pub fn gen_combo(label: &str, keywords: &[String]) -> BTreeSet<String> {
    let candidates = keywords.iter().flat_map(|kw| {
        [
            format!("{label}-{kw}"),
            format!("{kw}-{label}"),
            format!("{label}{kw}"),
            format!("{kw}{label}"),
        ]
    });
    collect(label, candidates)
}

/// The brand's registrable name placed under an unrelated registrable domain.
pub fn gen_level(brand: &Brand, host_label: &str, suffix: &str) -> String {
    format!("{}.{}.{}", brand.registrable(), host_label, suffix)
}

/// Shapes of generated hybrid names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridShape {
    /// `{variant}-{keyword}.{host}.{suffix}`
    VariantComboLevel,
    /// `{variant}-{keyword}.{other suffix}`
    VariantComboTld,
    /// `{brand}-{keyword}.{other suffix}`
    ComboTld,
}

impl HybridShape {
    pub const ALL: [HybridShape; 3] = [
        HybridShape::VariantComboLevel,
        HybridShape::VariantComboTld,
        HybridShape::ComboTld,
    ];
}

/// One hybrid name. `variant` is a label from one of the label generators;
/// `suffix` must differ from the brand's for the TLD shapes.
pub fn gen_hybrid(shape: HybridShape, brand: &Brand, variant: &str, keyword: &str, host_label: &str, suffix: &str) -> Option<String> {
    let joined = |left: &str| -> Option<String> {
        let unicode = format!("{}-{}", decode_label(left), keyword);
        finish(&unicode, brand.label())
    };
    match shape {
        HybridShape::VariantComboLevel => Some(format!("{}.{}.{}", joined(variant)?, host_label, suffix)),
        HybridShape::VariantComboTld if suffix != brand.suffix() => Some(format!("{}.{}", joined(variant)?, suffix)),
        HybridShape::ComboTld if suffix != brand.suffix() => Some(format!("{}.{}", joined(brand.label())?, suffix)),
        _ => None,
    }
}
