use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde_json::Value;

use super::mustpass::{Augmented, Expected};
use crate::dnx::ReferenceIndex;
use crate::domain::{normalize, Fqdn, SquattingType};
use crate::psl::SuffixRules;

/// Why an attempt was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectCode {
    Format,
    Consistency,
    MustPass,
    Target,
    Transport,
}

impl RejectCode {
    pub const ALL: [RejectCode; 5] =
        [RejectCode::Format, RejectCode::Consistency, RejectCode::MustPass, RejectCode::Target, RejectCode::Transport];

    /// Key in the feedback template file.
    pub fn code(self) -> &'static str {
        match self {
            RejectCode::Format => "F1",
            RejectCode::Consistency => "F2",
            RejectCode::MustPass => "F3",
            RejectCode::Target => "F4",
            RejectCode::Transport => "transport",
        }
    }
}

/// A rejection; `detail` is for logs and is never shown to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub code: RejectCode,
    pub detail: String,
}

impl Rejection {
    fn new(code: RejectCode, detail: impl Into<String>) -> Rejection {
        Rejection { code, detail: detail.into() }
    }
}

/// An output element that passed the format check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFinding {
    pub s: String,
    pub d: String,
    pub sx: String,
    pub kind: SquattingType,
    pub l: String,
}

/// A finding tied to an input name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub fqdn: Fqdn,
    pub kind: SquattingType,
    /// The target as the model wrote it; normalized by [`verify_targets`].
    pub target: String,
}

const KEYS: [&str; 5] = ["s", "d", "sx", "type", "l"];

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let Some(body) = rest.strip_suffix("```") else { return t };
    let body = body.strip_prefix("json").unwrap_or(body);
    body.trim()
}

pub fn validate_format(text: &str) -> Result<Vec<RawFinding>, Rejection> {
    let fail = |d: String| Rejection::new(RejectCode::Format, d);
    let value: Value = serde_json::from_str(strip_fences(text)).map_err(|e| fail(format!("not JSON: {e}")))?;
    let Value::Array(items) = value else { return Err(fail("top level is not an array".into())) };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let Value::Object(map) = item else { return Err(fail(format!("element {i} is not an object"))) };
            if map.len() != KEYS.len() || !KEYS.iter().all(|k| map.contains_key(*k)) {
                return Err(fail(format!("element {i} keys differ from s, d, sx, type, l")));
            }
            let field = |k: &str| map[k].as_str().map(str::to_string).ok_or_else(|| fail(format!("element {i}: {k} is not a string")));
            let kind_name = field("type")?;
            let kind = SquattingType::from_name(&kind_name).ok_or_else(|| fail(format!("element {i}: unknown type {kind_name:?}")))?;
            Ok(RawFinding { s: field("s")?, d: field("d")?, sx: field("sx")?, kind, l: field("l")? })
        })
        .collect()
}

/// Ties every finding to an input entry; repeated findings for one name
/// collapse to the first.
pub fn check_consistency(findings: Vec<RawFinding>, augmented: &Augmented) -> Result<Vec<Finding>, Rejection> {
    let inputs: HashSet<&str> = augmented.entries.iter().map(|e| e.fqdn().raw()).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(findings.len());
    for f in findings {
        let fqdn = Fqdn::from_parts(&f.s, &f.d, &f.sx)
            .map_err(|e| Rejection::new(RejectCode::Consistency, format!("{}.{}.{}: {e}", f.s, f.d, f.sx)))?;
        if !inputs.contains(fqdn.raw()) {
            return Err(Rejection::new(RejectCode::Consistency, format!("{} is not in the input", fqdn.raw())));
        }
        if seen.insert(fqdn.raw().to_string()) {
            out.push(Finding { fqdn, kind: f.kind, target: f.l });
        }
    }
    Ok(out)
}

/// Squat controls must be reported with their brand as target; benign
/// controls must not be reported.
pub fn verify_must_pass(findings: &[Finding], augmented: &Augmented) -> Result<(), Rejection> {
    let by_name: HashMap<&str, &Finding> = findings.iter().map(|f| (f.fqdn.raw(), f)).collect();
    for entry in augmented.must_pass() {
        let reported = by_name.get(entry.fqdn.raw());
        let ok = match (&entry.expected, reported) {
            (Expected::Benign, None) => true,
            (Expected::Benign, Some(_)) => false,
            (Expected::Squat { .. }, None) => false,
            (Expected::Squat { target }, Some(f)) => normalize(&f.target).is_ok_and(|t| &t == target),
        };
        if !ok {
            return Err(Rejection::new(RejectCode::MustPass, format!("control {} misclassified", entry.fqdn.raw())));
        }
    }
    Ok(())
}

/// Confirms that a registrable domain exists, for targets outside the
/// reference index.
pub trait TargetChecker: Send + Sync {
    fn exists(&self, registrable: &str) -> bool;
}

/// Offline checker backed by a list of known domains.
#[derive(Debug, Clone, Default)]
pub struct AllowlistChecker {
    names: HashSet<String>,
}

impl AllowlistChecker {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(names: I) -> AllowlistChecker {
        AllowlistChecker { names: names.into_iter().filter_map(|n| normalize(n.as_ref()).ok()).collect() }
    }

    /// One domain per line; blank lines and `#` comments are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> std::io::Result<AllowlistChecker> {
        let mut lines = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                lines.push(line.to_string());
            }
        }
        Ok(AllowlistChecker::new(lines))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl TargetChecker for AllowlistChecker {
    fn exists(&self, registrable: &str) -> bool {
        self.names.contains(registrable)
    }
}

/// Normalizes each target in place. A target must be a registrable domain
/// other than the finding's own, and be in the index or known to `checker`.
pub fn verify_targets(
    findings: &mut [Finding],
    index: &ReferenceIndex,
    checker: &dyn TargetChecker,
    rules: &SuffixRules,
) -> Result<(), Rejection> {
    for f in findings.iter_mut() {
        let fail = || Rejection::new(RejectCode::Target, format!("target {:?} of {}", f.target, f.fqdn.raw()));
        let target = Fqdn::parse(&f.target, rules).ok().filter(Fqdn::is_registrable).ok_or_else(fail)?;
        if target.raw() == f.fqdn.registrable() || !(index.contains(target.raw()) || checker.exists(target.raw())) {
            return Err(fail());
        }
        f.target = target.raw().to_string();
    }
    Ok(())
}

/// The four checks in order; a later one runs only if the earlier ones pass.
pub fn validate_response(
    text: &str,
    augmented: &Augmented,
    index: &ReferenceIndex,
    checker: &dyn TargetChecker,
    rules: &SuffixRules,
) -> Result<Vec<Finding>, Rejection> {
    let raw = validate_format(text)?;
    let mut findings = check_consistency(raw, augmented)?;
    verify_must_pass(&findings, augmented)?;
    verify_targets(&mut findings, index, checker, rules)?;
    Ok(findings)
}
