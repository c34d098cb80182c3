//! Labelled datasets of generated squats and benign names.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Fqdn, SquattingType, TypoSubtype};
use crate::psl::SuffixRules;

use super::detect::Detector;
use super::generate::{gen_bit, gen_combo, gen_homo, gen_hybrid, gen_level, gen_sound, gen_tld, gen_typo_all, HybridShape};
use super::tables::GeneratorTables;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("quota for {kind} is {requested} but only {available} unambiguous candidates exist")]
    Capacity { kind: &'static str, requested: usize, available: usize },
    #[error("requested {requested} benign names but only {available} could be generated")]
    BenignCapacity { requested: usize, available: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Requested number of squats per technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quotas {
    pub typo: usize,
    pub combo: usize,
    pub homo: usize,
    pub bit: usize,
    pub sound: usize,
    pub tld: usize,
    pub level: usize,
    pub hybrid: usize,
}

impl Quotas {
    /// 369 typo, 249 homograph, 136 bit, 33 sound, 156 TLD and 706 combo
    /// squats: 1,649 in total.
    pub const STANDARD: Quotas = Quotas {
        typo: 369,
        combo: 706,
        homo: 249,
        bit: 136,
        sound: 33,
        tld: 156,
        level: 0,
        hybrid: 0,
    };

    pub fn get(&self, kind: SquattingType) -> usize {
        match kind {
            SquattingType::Typo(_) => self.typo,
            SquattingType::Combo => self.combo,
            SquattingType::Homo => self.homo,
            SquattingType::Bit => self.bit,
            SquattingType::Sound => self.sound,
            SquattingType::Tld => self.tld,
            SquattingType::Level => self.level,
            SquattingType::Hybrid => self.hybrid,
        }
    }

    pub fn total(&self) -> usize {
        ALL_KINDS.iter().map(|&k| self.get(k)).sum()
    }
}

const ALL_KINDS: [SquattingType; 8] = [
    SquattingType::Typo(None),
    SquattingType::Combo,
    SquattingType::Homo,
    SquattingType::Bit,
    SquattingType::Sound,
    SquattingType::Tld,
    SquattingType::Level,
    SquattingType::Hybrid,
];

/// One dataset row. `kind` and `target` are `None` for benign names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabeledDomain {
    pub fqdn: String,
    pub kind: Option<SquattingType>,
    pub target: Option<String>,
}

impl LabeledDomain {
    pub fn is_benign(&self) -> bool {
        self.kind.is_none()
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    fqdn: String,
    #[serde(rename = "type")]
    kind: String,
    subtype: Option<String>,
    target: Option<String>,
}

/// A labelled dataset, sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub entries: Vec<LabeledDomain>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn squats(&self) -> impl Iterator<Item = &LabeledDomain> {
        self.entries.iter().filter(|e| !e.is_benign())
    }

    /// Number of squats per type name.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for kind in self.squats().filter_map(|e| e.kind) {
            *out.entry(kind.name()).or_default() += 1;
        }
        out
    }

    /// JSON lines: `{"fqdn","type","subtype","target"}`; benign rows use
    /// type `benign` and null target.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            let rec = Record {
                fqdn: e.fqdn.clone(),
                kind: e.kind.map_or("benign", SquattingType::name).to_string(),
                subtype: e.kind.and_then(SquattingType::subtype).map(|s| s.name().to_string()),
                target: e.target.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Dataset, DatasetError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| DatasetError::Parse { line: i + 1, reason };
            let rec: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let kind = match rec.kind.as_str() {
                "benign" => None,
                name => {
                    let kind = SquattingType::from_name(name).ok_or_else(|| bad(format!("unknown type {name:?}")))?;
                    Some(match (kind, rec.subtype.as_deref()) {
                        (SquattingType::Typo(_), Some(sub)) => SquattingType::Typo(Some(
                            TypoSubtype::from_name(sub).ok_or_else(|| bad(format!("unknown subtype {sub:?}")))?,
                        )),
                        (k, _) => k,
                    })
                }
            };
            if kind.is_some() && rec.target.is_none() {
                return Err(bad("squat row without target".into()));
            }
            entries.push(LabeledDomain { fqdn: rec.fqdn, kind, target: rec.target });
        }
        Ok(Dataset { entries })
    }
}

/// Settings for [`build_ground_truth`].
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    /// Squats target only the best-ranked `brand_limit` brands.
    pub brand_limit: usize,
    pub quotas: Quotas,
    pub benign: usize,
    pub seed: u64,
}

const BENIGN_HOSTS: [&str; 16] = [
    "www", "mail", "api", "login", "shop", "blog", "cdn", "static", "support", "m", "news", "docs", "app", "dev", "status", "help",
];

/// Level and hybrid names drawn per brand and shape.
const RANDOM_PER_BRAND: usize = 12;

fn random_label(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(6..=10);
    (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn brand_rng(seed: u64, brand: usize, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (brand as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

/// All raw candidates of one technique for one brand.
fn candidates(kind: SquattingType, det: &Detector, idx: usize, tables: &GeneratorTables, seed: u64) -> Vec<String> {
    let brand = det.brands().get(idx);
    let label = brand.label();
    let with_suffix = |v: String| format!("{v}.{}", brand.suffix());
    match kind {
        SquattingType::Typo(_) => gen_typo_all(label, &tables.keyboard).into_iter().map(|(v, _)| with_suffix(v)).collect(),
        SquattingType::Bit => gen_bit(label).into_iter().map(with_suffix).collect(),
        SquattingType::Homo => gen_homo(label, &tables.confusables).into_iter().map(with_suffix).collect(),
        SquattingType::Sound => gen_sound(label, &tables.homophones).into_iter().map(with_suffix).collect(),
        SquattingType::Tld => gen_tld(brand, &tables.tlds).into_iter().collect(),
        SquattingType::Combo => gen_combo(label, &tables.keywords).into_iter().map(with_suffix).collect(),
        SquattingType::Level => {
            let mut rng = brand_rng(seed, idx, 0x1e7e1);
            (0..RANDOM_PER_BRAND)
                .map(|_| {
                    let host = random_label(&mut rng);
                    let suffix = tables.tlds.choose(&mut rng).map_or("com", String::as_str);
                    gen_level(brand, &host, suffix)
                })
                .collect()
        }
        SquattingType::Hybrid => {
            let mut rng = brand_rng(seed, idx, 0x4b1d);
            let variants: Vec<String> = gen_typo_all(label, &tables.keyboard)
                .into_iter()
                .map(|(v, _)| v)
                .chain(gen_bit(label))
                .chain(gen_homo(label, &tables.confusables))
                .chain(gen_sound(label, &tables.homophones))
                .collect();
            let mut out = Vec::new();
            for shape in HybridShape::ALL {
                for _ in 0..RANDOM_PER_BRAND {
                    let (Some(variant), Some(kw), Some(suffix)) = (
                        variants.choose(&mut rng),
                        tables.keywords.choose(&mut rng),
                        tables.tlds.choose(&mut rng),
                    ) else {
                        break;
                    };
                    let host = random_label(&mut rng);
                    out.extend(gen_hybrid(shape, brand, variant, kw, &host, suffix));
                }
            }
            out
        }
    }
}

/// Candidates of `kind` over the first `brand_limit` brands that the
/// detector attributes to the generating brand with the same technique.
/// Returns `(fqdn, detected kind, target)` sorted by name.
pub fn unambiguous_pool(
    kind: SquattingType,
    det: &Detector,
    brand_limit: usize,
    tables: &GeneratorTables,
    rules: &SuffixRules,
    seed: u64,
) -> Vec<LabeledDomain> {
    let limit = brand_limit.min(det.brands().len());
    let mut pool: Vec<LabeledDomain> = (0..limit)
        .into_par_iter()
        .flat_map_iter(|idx| {
            candidates(kind, det, idx, tables, seed).into_iter().filter_map(move |name| {
                let fqdn = Fqdn::parse(&name, rules).ok()?;
                let found = det.extended(&fqdn)?;
                (found.brand == idx && found.kind.same_kind(kind)).then(|| LabeledDomain {
                    fqdn: fqdn.raw().to_string(),
                    kind: Some(found.kind),
                    target: Some(det.brands().get(idx).registrable().to_string()),
                })
            })
        })
        .collect();
    pool.sort();
    pool.dedup_by(|a, b| a.fqdn == b.fqdn);
    pool
}

fn benign_pool(det: &Detector, spec: &DatasetSpec, tables: &GeneratorTables, rules: &SuffixRules) -> Result<Vec<String>, DatasetError> {
    let limit = spec.brand_limit.min(det.brands().len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xbe9191);
    let mut subdomains: Vec<String> = (0..limit)
        .flat_map(|i| BENIGN_HOSTS.iter().map(move |h| (i, h)))
        .map(|(i, h)| format!("{h}.{}", det.brands().get(i).registrable()))
        .collect();
    subdomains.shuffle(&mut rng);
    let mut out: BTreeSet<String> = subdomains.into_iter().take(spec.benign / 2).collect();
    let mut attempts = 0usize;
    while out.len() < spec.benign && attempts < spec.benign * 50 + 100 {
        attempts += 1;
        let suffix = tables.tlds.choose(&mut rng).map_or("com", String::as_str);
        let name = format!("{}.{suffix}", random_label(&mut rng));
        let Ok(fqdn) = Fqdn::parse(&name, rules) else { continue };
        if det.extended(&fqdn).is_none() && !det.brands().contains_domain(&fqdn.registrable()) {
            out.insert(name);
        }
    }
    if out.len() < spec.benign {
        return Err(DatasetError::BenignCapacity { requested: spec.benign, available: out.len() });
    }
    Ok(out.into_iter().collect())
}

/// Seeded sample of generated squats meeting `spec.quotas` exactly, plus
/// benign names. Candidates the detector would attribute to another brand
/// or technique are never sampled.
pub fn build_ground_truth(
    det: &Detector,
    spec: &DatasetSpec,
    tables: &GeneratorTables,
    rules: &SuffixRules,
) -> Result<Dataset, DatasetError> {
    let mut entries = Vec::new();
    for (i, &kind) in ALL_KINDS.iter().enumerate() {
        let quota = spec.quotas.get(kind);
        if quota == 0 {
            continue;
        }
        let mut pool = unambiguous_pool(kind, det, spec.brand_limit, tables, rules, spec.seed);
        if pool.len() < quota {
            return Err(DatasetError::Capacity { kind: kind.name(), requested: quota, available: pool.len() });
        }
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(i as u64)));
        pool.truncate(quota);
        entries.extend(pool);
    }
    if spec.benign > 0 {
        entries.extend(
            benign_pool(det, spec, tables, rules)?
                .into_iter()
                .map(|fqdn| LabeledDomain { fqdn, kind: None, target: None }),
        );
    }
    entries.sort();
    Ok(Dataset { entries })
}

/// `n` hybrid names for the first `brand_limit` brands, drawn without
/// consulting any detector.
pub fn hybrid_fixture(det: &Detector, brand_limit: usize, n: usize, tables: &GeneratorTables, seed: u64) -> Vec<(String, String)> {
    let limit = brand_limit.min(det.brands().len());
    let mut all: Vec<(String, String)> = (0..limit)
        .flat_map(|idx| {
            let target = det.brands().get(idx).registrable().to_string();
            candidates(SquattingType::Hybrid, det, idx, tables, seed)
                .into_iter()
                .map(move |name| (name, target.clone()))
        })
        .collect();
    all.sort();
    all.dedup_by(|a, b| a.0 == b.0);
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    all.truncate(n);
    all
}
