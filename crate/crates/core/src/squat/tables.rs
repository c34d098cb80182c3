//! Lookup tables behind the generators: keyboard adjacency, confusable
//! characters, homophones, combo keywords and candidate suffixes. Bundled
//! copies live in `data/`; each table can also be loaded from an operator's
//! file in the same format.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn two_columns(line_no: usize, line: &str) -> Result<(String, String), TableError> {
    let mut cols = line.split('\t');
    match (cols.next(), cols.next()) {
        (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_lowercase(), b.to_lowercase())),
        _ => Err(TableError::Malformed {
            line: line_no,
            reason: "expected two tab-separated columns".into(),
        }),
    }
}

/// Keys adjacent to each key on a keyboard.
#[derive(Debug, Clone, Default)]
pub struct Keyboard {
    adjacent: BTreeMap<char, Vec<char>>,
}

impl Keyboard {
    pub fn parse(text: &str) -> Result<Keyboard, TableError> {
        let mut adjacent = BTreeMap::new();
        for (no, line) in data_lines(text) {
            let (key, near) = two_columns(no, line)?;
            let mut chars = key.chars();
            let (Some(k), None) = (chars.next(), chars.next()) else {
                return Err(TableError::Malformed { line: no, reason: "key must be one character".into() });
            };
            adjacent.insert(k, near.chars().collect());
        }
        Ok(Keyboard { adjacent })
    }

    pub fn qwerty() -> &'static Keyboard {
        static KB: OnceLock<Keyboard> = OnceLock::new();
        KB.get_or_init(|| Keyboard::parse(include_str!("../../data/keyboard_qwerty.tsv")).expect("bundled keyboard"))
    }

    pub fn neighbors(&self, key: char) -> &[char] {
        self.adjacent.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Visually confusable sequences. Every listed pair is usable in both
/// directions.
#[derive(Debug, Clone, Default)]
pub struct ConfusableTable {
    /// `(from, to)` with both directions present, sorted and deduplicated.
    mappings: Vec<(String, String)>,
}

impl ConfusableTable {
    pub fn parse(text: &str) -> Result<ConfusableTable, TableError> {
        let mut set = BTreeSet::new();
        for (no, line) in data_lines(text) {
            let (a, b) = two_columns(no, line)?;
            if a == b {
                return Err(TableError::Malformed { line: no, reason: "identity mapping".into() });
            }
            set.insert((a.clone(), b.clone()));
            set.insert((b, a));
        }
        Ok(ConfusableTable { mappings: set.into_iter().collect() })
    }

    pub fn bundled() -> &'static ConfusableTable {
        static T: OnceLock<ConfusableTable> = OnceLock::new();
        T.get_or_init(|| ConfusableTable::parse(include_str!("../../data/confusables.tsv")).expect("bundled confusables"))
    }

    pub fn mappings(&self) -> &[(String, String)] {
        &self.mappings
    }

    pub fn len(&self) -> usize {
        self.mappings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty()
    }
}

/// Directed token → sounds-alike replacements.
#[derive(Debug, Clone, Default)]
pub struct HomophoneTable {
    replacements: BTreeMap<String, Vec<String>>,
    longest: usize,
}

impl HomophoneTable {
    pub fn parse(text: &str) -> Result<HomophoneTable, TableError> {
        let mut pairs = Vec::new();
        for (no, line) in data_lines(text) {
            pairs.push(two_columns(no, line)?);
        }
        Ok(HomophoneTable::from_pairs(pairs))
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> HomophoneTable
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut table = HomophoneTable::default();
        for (a, b) in pairs {
            let a = a.into();
            table.longest = table.longest.max(a.len());
            let entry = table.replacements.entry(a).or_default();
            let b = b.into();
            if !entry.contains(&b) {
                entry.push(b);
            }
        }
        table
    }

    pub fn bundled() -> &'static HomophoneTable {
        static T: OnceLock<HomophoneTable> = OnceLock::new();
        T.get_or_init(|| HomophoneTable::parse(include_str!("../../data/homophones.tsv")).expect("bundled homophones"))
    }

    /// Longest token matching at the start of `text`, with its replacements.
    pub fn longest_match(&self, text: &str) -> Option<(&str, &[String])> {
        (1..=self.longest.min(text.len()))
            .rev()
            .filter(|&n| text.is_char_boundary(n))
            .find_map(|n| self.replacements.get_key_value(&text[..n]))
            .map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// One word per line.
pub fn parse_word_list(text: &str) -> Vec<String> {
    data_lines(text).map(|(_, l)| l.trim().to_lowercase()).collect()
}

/// All tables the generators and detectors need.
#[derive(Debug, Clone)]
pub struct GeneratorTables {
    pub keyboard: Keyboard,
    pub confusables: ConfusableTable,
    pub homophones: HomophoneTable,
    pub keywords: Vec<String>,
    /// Suffixes tried when generating TLD squats.
    pub tlds: Vec<String>,
}

impl GeneratorTables {
    pub fn bundled() -> GeneratorTables {
        GeneratorTables {
            keyboard: Keyboard::qwerty().clone(),
            confusables: ConfusableTable::bundled().clone(),
            homophones: HomophoneTable::bundled().clone(),
            keywords: parse_word_list(include_str!("../../data/combo_keywords.txt")),
            tlds: parse_word_list(include_str!("../../data/tlds.txt")),
        }
    }
}

impl Default for GeneratorTables {
    fn default() -> Self {
        GeneratorTables::bundled()
    }
}
