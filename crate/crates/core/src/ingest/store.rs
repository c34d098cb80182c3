use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: line {line}: expected `fqdn<TAB>first_seen`")]
    Corrupt { path: PathBuf, line: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Names seen so far with their first-seen time. Backed by a sorted
/// `fqdn<TAB>first_seen` text file, or by memory only.
#[derive(Debug, Clone, Default)]
pub struct ObservationStore {
    path: Option<PathBuf>,
    seen: BTreeMap<String, u64>,
}

impl ObservationStore {
    pub fn in_memory() -> ObservationStore {
        ObservationStore::default()
    }

    /// Loads `path`; a missing file is an empty store.
    pub fn open(path: impl AsRef<Path>) -> Result<ObservationStore, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut seen = BTreeMap::new();
        match fs::read_to_string(&path) {
            Ok(text) => {
                for (i, line) in text.lines().enumerate() {
                    if line.is_empty() {
                        continue;
                    }
                    let parsed = line.split_once('\t').and_then(|(n, t)| Some((n, t.parse::<u64>().ok()?)));
                    let Some((name, ts)) = parsed.filter(|(n, _)| !n.is_empty()) else {
                        return Err(StoreError::Corrupt { path, line: i + 1 });
                    };
                    seen.entry(name.to_string()).or_insert(ts);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => return Err(StoreError::Io { path, source }),
        }
        Ok(ObservationStore { path: Some(path), seen })
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn first_seen(&self, name: &str) -> Option<u64> {
        self.seen.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.seen.contains_key(name)
    }

    fn persist(&self, seen: &BTreeMap<String, u64>) -> Result<(), StoreError> {
        let Some(path) = &self.path else { return Ok(()) };
        let io = |source| StoreError::Io { path: path.clone(), source };
        let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp).map_err(io)?);
        for (name, ts) in seen {
            writeln!(w, "{name}\t{ts}").map_err(io)?;
        }
        w.into_inner().map_err(|e| io(e.into_error()))?.sync_all().map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    /// Names in `current` not seen before, sorted. They are recorded with
    /// `first_seen` only if the store file is written successfully.
    pub fn observe<'a, I>(&mut self, current: I, first_seen: u64) -> Result<Vec<String>, StoreError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut fresh: Vec<String> = current.into_iter().filter(|n| !self.seen.contains_key(*n)).map(str::to_string).collect();
        fresh.sort();
        fresh.dedup();
        if fresh.is_empty() {
            return Ok(fresh);
        }
        let mut next = self.seen.clone();
        for name in &fresh {
            next.insert(name.clone(), first_seen);
        }
        self.persist(&next)?;
        self.seen = next;
        Ok(fresh)
    }
}

/// `current` minus everything already in `store`; the difference is added
/// to the store.
pub fn new_observed<'a, I>(store: &mut ObservationStore, current: I, first_seen: u64) -> Result<Vec<String>, StoreError>
where
    I: IntoIterator<Item = &'a str>,
{
    store.observe(current, first_seen)
}
