//! Domain names: normalization, public-suffix decomposition and the
//! structured `{s, d, sx}` form handed to the model.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::psl::SuffixRules;

const MAX_LABEL: usize = 63;
const MAX_NAME: usize = 253;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NameError {
    #[error("empty domain name")]
    Empty,
    #[error("empty label at byte {position}")]
    EmptyLabel { position: usize },
    #[error("illegal character {ch:?} at byte {position}")]
    IllegalChar { ch: char, position: usize },
    #[error("label longer than 63 octets at byte {position}")]
    LabelTooLong { position: usize },
    #[error("name longer than 253 octets")]
    NameTooLong,
    #[error("label at byte {position} cannot be punycode-encoded")]
    Punycode { position: usize },
    #[error("{name:?} is a bare public suffix")]
    BareSuffix { name: String },
}

/// Lowercases `raw`, strips one trailing dot and converts internationalized
/// labels to their `xn--` form. Idempotent.
pub fn normalize(raw: &str) -> Result<String, NameError> {
    let trimmed = raw.strip_suffix('.').unwrap_or(raw);
    if trimmed.is_empty() {
        return Err(NameError::Empty);
    }
    let mut out = String::with_capacity(trimmed.len());
    let mut offset = 0;
    for label in trimmed.split('.') {
        if label.is_empty() {
            return Err(NameError::EmptyLabel { position: offset });
        }
        if !out.is_empty() {
            out.push('.');
        }
        let mut lowered = String::with_capacity(label.len());
        let mut ascii = true;
        for (i, ch) in label.char_indices() {
            for lc in ch.to_lowercase() {
                let ok = if lc.is_ascii() {
                    lc.is_ascii_lowercase() || lc.is_ascii_digit() || lc == '-' || lc == '_'
                } else {
                    ascii = false;
                    lc.is_alphanumeric() || is_combining_mark(lc)
                };
                if !ok {
                    return Err(NameError::IllegalChar { ch, position: offset + i });
                }
                lowered.push(lc);
            }
        }
        let encoded = if ascii {
            lowered
        } else {
            let body = idna::punycode::encode_str(&lowered)
                .ok_or(NameError::Punycode { position: offset })?;
            format!("xn--{body}")
        };
        if encoded.len() > MAX_LABEL {
            return Err(NameError::LabelTooLong { position: offset });
        }
        out.push_str(&encoded);
        offset += label.len() + 1;
    }
    if out.len() > MAX_NAME {
        return Err(NameError::NameTooLong);
    }
    Ok(out)
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32, 0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF)
}

/// Unicode display form of a normalized name; labels that fail to decode
/// are left as they are.
pub fn display_form(ascii: &str) -> String {
    ascii
        .split('.')
        .map(decode_label)
        .collect::<Vec<_>>()
        .join(".")
}

/// Decodes one `xn--` label; other labels are returned unchanged.
pub fn decode_label(label: &str) -> String {
    label
        .strip_prefix("xn--")
        .and_then(idna::punycode::decode_to_string)
        .unwrap_or_else(|| label.to_string())
}

/// ASCII-compatible form of a single Unicode label.
pub fn encode_label(label: &str) -> Option<String> {
    if label.is_ascii() {
        Some(label.to_string())
    } else {
        idna::punycode::encode_str(label).map(|body| format!("xn--{body}"))
    }
}

/// Strict hostname label check: `[a-z0-9-]`, no leading or trailing hyphen,
/// 1..=63 octets.
pub fn is_hostname_label(label: &str) -> bool {
    !label.is_empty()
        && label.len() <= MAX_LABEL
        && !label.starts_with('-')
        && !label.ends_with('-')
        && label
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

/// A decomposed fully-qualified domain name.
///
/// `s` is the (possibly empty, possibly multi-label) subdomain, `d` the
/// registrable label and `sx` the public suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fqdn {
    raw: String,
    s: String,
    d: String,
    sx: String,
}

impl Fqdn {
    /// Normalizes `raw` and splits it at the longest matching public suffix.
    pub fn parse(raw: &str, rules: &SuffixRules) -> Result<Fqdn, NameError> {
        let raw = normalize(raw)?;
        let suffix_labels = rules.suffix_labels(&raw);
        let labels: Vec<&str> = raw.split('.').collect();
        if labels.len() <= suffix_labels {
            return Err(NameError::BareSuffix { name: raw });
        }
        let split = labels.len() - suffix_labels;
        Ok(Fqdn {
            s: labels[..split - 1].join("."),
            d: labels[split - 1].to_string(),
            sx: labels[split..].join("."),
            raw,
        })
    }

    /// Reassembles a name from its parts without consulting suffix rules.
    pub fn from_parts(s: &str, d: &str, sx: &str) -> Result<Fqdn, NameError> {
        let d = normalize(d)?;
        if d.contains('.') {
            return Err(NameError::IllegalChar { ch: '.', position: d.find('.').unwrap_or(0) });
        }
        let sx = normalize(sx)?;
        let s = if s.is_empty() { String::new() } else { normalize(s)? };
        let raw = [s.as_str(), d.as_str(), sx.as_str()]
            .iter()
            .filter(|p| !p.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(".");
        if raw.len() > MAX_NAME {
            return Err(NameError::NameTooLong);
        }
        Ok(Fqdn { raw, s, d, sx })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn subdomain(&self) -> &str {
        &self.s
    }

    pub fn label(&self) -> &str {
        &self.d
    }

    pub fn suffix(&self) -> &str {
        &self.sx
    }

    /// `d.sx`.
    pub fn registrable(&self) -> String {
        format!("{}.{}", self.d, self.sx)
    }

    /// `s.d` with the suffix dropped; `d` alone when there is no subdomain.
    pub fn without_suffix(&self) -> String {
        if self.s.is_empty() {
            self.d.clone()
        } else {
            format!("{}.{}", self.s, self.d)
        }
    }

    pub fn is_registrable(&self) -> bool {
        self.s.is_empty()
    }

    pub fn display(&self) -> String {
        display_form(&self.raw)
    }

    pub fn to_structured(&self) -> StructuredName {
        StructuredName {
            s: self.s.clone(),
            d: self.d.clone(),
            sx: self.sx.clone(),
        }
    }
}

impl fmt::Display for Fqdn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// The structured record `{"s": .., "d": .., "sx": ..}`; `s` is always
/// present and empty when there is no subdomain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StructuredName {
    pub s: String,
    pub d: String,
    pub sx: String,
}

impl StructuredName {
    pub fn to_fqdn(&self) -> Result<Fqdn, NameError> {
        Fqdn::from_parts(&self.s, &self.d, &self.sx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypoSubtype {
    MissingDot,
    Omission,
    Permutation,
    Replacement,
    Insertion,
}

impl TypoSubtype {
    pub const ALL: [TypoSubtype; 5] = [
        TypoSubtype::MissingDot,
        TypoSubtype::Omission,
        TypoSubtype::Permutation,
        TypoSubtype::Replacement,
        TypoSubtype::Insertion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TypoSubtype::MissingDot => "missing-dot",
            TypoSubtype::Omission => "omission",
            TypoSubtype::Permutation => "permutation",
            TypoSubtype::Replacement => "replacement",
            TypoSubtype::Insertion => "insertion",
        }
    }

    pub fn from_name(name: &str) -> Option<TypoSubtype> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// The eight squatting techniques. `Typo` may carry the kind of typing
/// error when it is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SquattingType {
    Typo(Option<TypoSubtype>),
    Homo,
    Bit,
    Sound,
    Tld,
    Combo,
    Level,
    Hybrid,
}

impl SquattingType {
    /// Wire names, in the order the model is taught them.
    pub const NAMES: [&'static str; 8] = [
        "typo", "combo", "homo", "bit", "sound", "tld", "level", "hybrid",
    ];

    pub fn name(self) -> &'static str {
        match self {
            SquattingType::Typo(_) => "typo",
            SquattingType::Homo => "homo",
            SquattingType::Bit => "bit",
            SquattingType::Sound => "sound",
            SquattingType::Tld => "tld",
            SquattingType::Combo => "combo",
            SquattingType::Level => "level",
            SquattingType::Hybrid => "hybrid",
        }
    }

    pub fn from_name(name: &str) -> Option<SquattingType> {
        Some(match name {
            "typo" => SquattingType::Typo(None),
            "homo" => SquattingType::Homo,
            "bit" => SquattingType::Bit,
            "sound" => SquattingType::Sound,
            "tld" => SquattingType::Tld,
            "combo" => SquattingType::Combo,
            "level" => SquattingType::Level,
            "hybrid" => SquattingType::Hybrid,
            _ => return None,
        })
    }

    pub fn subtype(self) -> Option<TypoSubtype> {
        match self {
            SquattingType::Typo(sub) => sub,
            _ => None,
        }
    }

    /// Same technique, ignoring any typo subtype.
    pub fn same_kind(self, other: SquattingType) -> bool {
        self.name() == other.name()
    }
}

impl fmt::Display for SquattingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictSource {
    Llm,
    Baseline,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerdictError {
    #[error("target {0:?} is not a registrable domain")]
    BadTarget(String),
    #[error("target {0:?} is the input's own registrable domain")]
    SelfTarget(String),
    #[error("hybrid verdict needs at least two techniques")]
    HybridTechniques,
}

/// One squatting finding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Verdict {
    pub fqdn: Fqdn,
    pub kind: SquattingType,
    /// Registrable domain of the impersonated brand.
    pub target: String,
    pub source: VerdictSource,
    /// Techniques combined by a hybrid; empty for other kinds and for model
    /// verdicts, which name the type only.
    pub techniques: Vec<SquattingType>,
}

impl Verdict {
    pub fn new(
        fqdn: Fqdn,
        kind: SquattingType,
        target: &str,
        source: VerdictSource,
        rules: &SuffixRules,
    ) -> Result<Verdict, VerdictError> {
        let parsed = Fqdn::parse(target, rules)
            .ok()
            .filter(Fqdn::is_registrable)
            .ok_or_else(|| VerdictError::BadTarget(target.to_string()))?;
        if parsed.raw() == fqdn.registrable() {
            return Err(VerdictError::SelfTarget(target.to_string()));
        }
        Ok(Verdict {
            fqdn,
            kind,
            target: parsed.raw,
            source,
            techniques: Vec::new(),
        })
    }

    pub fn with_techniques(mut self, techniques: Vec<SquattingType>) -> Result<Verdict, VerdictError> {
        if self.kind == SquattingType::Hybrid && techniques.len() < 2 {
            return Err(VerdictError::HybridTechniques);
        }
        self.techniques = techniques;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rules() -> &'static SuffixRules {
        SuffixRules::bundled()
    }

    #[test]
    fn normalize_case_and_trailing_dot() {
        assert_eq!(normalize("WWW.Example.COM.").unwrap(), "www.example.com");
        assert_eq!(normalize("example.com").unwrap(), "example.com");
    }

    #[test]
    fn normalize_encodes_cyrillic() {
        // U+0430 in place of the first Latin "a".
        assert_eq!(normalize("\u{0430}mazon.com").unwrap(), "xn--mazon-3ve.com");
        assert_eq!(normalize("\u{0430}pple.com").unwrap(), "xn--pple-43d.com");
        assert_eq!(display_form("xn--pple-43d.com"), "\u{0430}pple.com");
    }

    #[test]
    fn normalize_rejects_with_position() {
        assert_eq!(normalize("a..com"), Err(NameError::EmptyLabel { position: 2 }));
        assert_eq!(
            normalize("exa mple.com"),
            Err(NameError::IllegalChar { ch: ' ', position: 3 })
        );
        assert_eq!(normalize(""), Err(NameError::Empty));
        assert_eq!(normalize("."), Err(NameError::Empty));
        assert!(matches!(
            normalize(&format!("{}.com", "a".repeat(64))),
            Err(NameError::LabelTooLong { position: 0 })
        ));
    }

    #[test]
    fn parse_examples() {
        let f = Fqdn::parse("www.example.co.jp", rules()).unwrap();
        assert_eq!((f.subdomain(), f.label(), f.suffix()), ("www", "example", "co.jp"));
        let f = Fqdn::parse("amazon.com.example.com", rules()).unwrap();
        assert_eq!((f.subdomain(), f.label(), f.suffix()), ("amazon.com", "example", "com"));
        let f = Fqdn::parse("example.com", rules()).unwrap();
        assert_eq!((f.subdomain(), f.label(), f.suffix()), ("", "example", "com"));
    }

    #[test]
    fn bare_suffix_rejected() {
        assert!(matches!(Fqdn::parse("co.jp", rules()), Err(NameError::BareSuffix { .. })));
        assert!(matches!(Fqdn::parse("com", rules()), Err(NameError::BareSuffix { .. })));
    }

    #[test]
    fn structured_form() {
        let f = Fqdn::parse("www.amazon.com", rules()).unwrap();
        assert_eq!(
            serde_json::to_string(&f.to_structured()).unwrap(),
            r#"{"s":"www","d":"amazon","sx":"com"}"#
        );
        let f = Fqdn::parse("example.com", rules()).unwrap();
        assert_eq!(
            serde_json::to_string(&f.to_structured()).unwrap(),
            r#"{"s":"","d":"example","sx":"com"}"#
        );
        assert_eq!(f.to_structured().to_fqdn().unwrap(), f);
    }

    #[test]
    fn registrable_forms() {
        for (name, reg) in [
            ("www.example.co.jp", "example.co.jp"),
            ("login.amaz0n.com", "amaz0n.com"),
            ("example.com", "example.com"),
        ] {
            assert_eq!(Fqdn::parse(name, rules()).unwrap().registrable(), reg);
        }
    }

    #[test]
    fn type_names_round_trip() {
        for name in SquattingType::NAMES {
            assert_eq!(SquattingType::from_name(name).unwrap().name(), name);
        }
        assert_eq!(SquattingType::from_name("phishing"), None);
    }

    #[test]
    fn verdict_rejects_self_target() {
        let f = Fqdn::parse("www.amazon.com", rules()).unwrap();
        assert!(matches!(
            Verdict::new(f.clone(), SquattingType::Combo, "amazon.com", VerdictSource::Llm, rules()),
            Err(VerdictError::SelfTarget(_))
        ));
        assert!(matches!(
            Verdict::new(f, SquattingType::Combo, "www.example.com", VerdictSource::Llm, rules()),
            Err(VerdictError::BadTarget(_))
        ));
    }

    /// Longest-suffix oracle: try every rule against every tail of the name.
    fn brute_force_suffix(name: &str, rules: &SuffixRules) -> String {
        use crate::psl::RuleKind;
        let labels: Vec<&str> = name.split('.').collect();
        let mut best: Option<usize> = None;
        let mut exception: Option<usize> = None;
        for (kind, rule) in rules.rules() {
            let rl: Vec<&str> = rule.split('.').collect();
            for start in 0..labels.len() {
                let tail = &labels[start..];
                let hit = match kind {
                    RuleKind::Normal | RuleKind::Exception => tail == rl.as_slice(),
                    RuleKind::Wildcard => tail.len() == rl.len() + 1 && tail[1..] == rl[..],
                };
                if hit {
                    match kind {
                        RuleKind::Exception => exception = Some(tail.len() - 1),
                        _ => best = Some(best.map_or(tail.len(), |b: usize| b.max(tail.len()))),
                    }
                }
            }
        }
        let keep = exception.or(best).unwrap_or(1);
        labels[labels.len() - keep..].join(".")
    }

    #[test]
    fn suffix_matches_brute_force_scan() {
        let text = "com\nco.jp\njp\n*.ck\n!www.ck\n*.kawasaki.jp\n!city.kawasaki.jp\nuk\nco.uk\n";
        let small = SuffixRules::parse(text, crate::psl::Sections::All);
        for name in [
            "a.b.example.co.jp",
            "foo.bar.ck",
            "www.ck",
            "x.www.ck",
            "a.city.kawasaki.jp",
            "b.c.kawasaki.jp",
            "kawasaki.jp",
            "shop.co.uk",
            "host.zz",
        ] {
            assert_eq!(small.suffix_of(name), brute_force_suffix(name, &small), "{name}");
        }
    }

    fn label_strategy() -> impl Strategy<Value = String> {
        "[a-z0-9]([a-z0-9-]{0,10}[a-z0-9])?"
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "[A-Za-z0-9\u{0430}-\u{044f}-]{1,12}(\\.[A-Za-z0-9-]{1,12}){0,3}\\.?") {
            if let Ok(once) = normalize(&raw) {
                prop_assert_eq!(normalize(&once).unwrap(), once);
            }
        }

        #[test]
        fn parse_then_reassemble_is_identity(
            sub in proptest::collection::vec(label_strategy(), 0..3),
            d in label_strategy(),
            sx in prop::sample::select(vec!["com", "co.jp", "org", "co.uk", "shop", "zz"]),
        ) {
            let mut parts = sub.clone();
            parts.push(d.clone());
            parts.push(sx.to_string());
            let name = parts.join(".");
            let parsed = Fqdn::parse(&name, rules());
            prop_assume!(parsed.is_ok());
            let f = parsed.unwrap();
            let back = Fqdn::from_parts(f.subdomain(), f.label(), f.suffix()).unwrap();
            prop_assert_eq!(back.raw(), name.as_str());
            prop_assert_eq!(f.suffix(), brute_force_suffix(&name, rules()));
        }
    }
}
