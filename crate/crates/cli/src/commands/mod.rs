mod dataset;
mod detect;
mod eval;
mod ingest;
mod report;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use squatwatch::dnx::{DnxError, Embedder, LocalEmbedder, ReferenceIndex, RemoteEmbedder};
use squatwatch::domain::Fqdn;
use squatwatch::psl::SuffixRules;
use squatwatch::squat::{read_ranked_list, BrandSet, Detector, GeneratorTables, RankedDomain};

use crate::config::{Config, EmbedderConfig};
use crate::exit::Classify;
use crate::{Cli, Command};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = Config::load(&cli.config).input()?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Ingest { out } => ingest::run(&config, out.as_deref().unwrap_or(&config.output.names)),
        Command::Index { rebuild } => index(&config, rebuild),
        Command::Detect { input, out, chunk_size, max_attempts } => {
            apply_overrides(&mut config, chunk_size, max_attempts)?;
            detect::run_detect(
                &config,
                input.as_deref().unwrap_or(&config.output.names),
                out.as_deref().unwrap_or(&config.output.verdicts),
            )
        }
        Command::Baseline { input, out } => detect::run_baseline(
            &config,
            input.as_deref().unwrap_or(&config.output.names),
            out.as_deref().unwrap_or(&config.output.baseline),
        ),
        Command::Eval { dataset, baseline, chunk_size, max_attempts } => {
            apply_overrides(&mut config, chunk_size, max_attempts)?;
            eval::run(&config, dataset.as_deref().unwrap_or(&config.output.dataset), baseline)
        }
        Command::Report { verdicts, input_tokens, output_tokens, json } => report::run(
            &config,
            verdicts.as_deref().unwrap_or(&config.output.verdicts),
            input_tokens,
            output_tokens,
            json,
        ),
        Command::Dataset { out, hybrid } => dataset::run(&config, out, hybrid),
    }
}

fn apply_overrides(config: &mut Config, chunk_size: Option<usize>, max_attempts: Option<u32>) -> Result<()> {
    if let Some(n) = chunk_size {
        config.pipeline.chunk_size = n;
    }
    if let Some(n) = max_attempts {
        config.pipeline.max_attempts = n;
    }
    config.validate().input()
}

fn rules() -> &'static SuffixRules {
    SuffixRules::bundled()
}

/// The configured reference rows, truncated to `reference.limit`.
pub(crate) fn reference_rows(config: &Config) -> Result<Vec<RankedDomain>> {
    let path = &config.reference.list;
    let file = File::open(path).with_context(|| format!("opening reference list {}", path.display())).input()?;
    let mut rows = read_ranked_list(BufReader::new(file))
        .with_context(|| format!("reading reference list {}", path.display()))
        .input()?;
    if let Some(limit) = config.reference.limit {
        rows.truncate(limit);
    }
    Ok(rows)
}

pub(crate) fn detector(config: &Config, rows: &[RankedDomain]) -> Result<Arc<Detector>> {
    let brands = BrandSet::from_ranked(rows, config.reference.brand_limit, rules()).input()?;
    log::info!("detector over {} brands", brands.len());
    Ok(Arc::new(Detector::new(brands, &GeneratorTables::bundled())))
}

pub(crate) fn embedder(config: &Config) -> Result<Box<dyn Embedder>> {
    Ok(match &config.embedder {
        EmbedderConfig::Local { dimension } => Box::new(LocalEmbedder { dim: *dimension }),
        EmbedderConfig::Remote(remote) => Box::new(RemoteEmbedder::new(remote.clone()).input()?),
    })
}

fn index(config: &Config, rebuild: bool) -> Result<ExitCode> {
    let rows = reference_rows(config)?;
    let embedder = embedder(config)?;
    let path = &config.reference.index;
    if rebuild && path.exists() {
        std::fs::remove_file(path).with_context(|| format!("removing {}", path.display())).index()?;
    }
    let index = ReferenceIndex::load_or_build(path, &rows, embedder.as_ref(), rules())
        .map_err(|e| match e {
            DnxError::RebuildRequired { .. } => anyhow::Error::new(e).context("pass --rebuild to replace it"),
            other => anyhow::Error::new(other),
        })
        .index()?;
    println!("entries {} embedder {} path {}", index.len(), index.embedder_id(), path.display());
    Ok(ExitCode::SUCCESS)
}

/// Loads the index built by `index`; a missing or mismatched sidecar is an
/// index error.
pub(crate) fn load_index(config: &Config, embedder: &dyn Embedder) -> Result<ReferenceIndex> {
    let path = &config.reference.index;
    if !path.exists() {
        return Err(anyhow::anyhow!("{} does not exist; run `squatwatch index` first", path.display())).index();
    }
    ReferenceIndex::load(path, &embedder.id(), embedder.dimension())
        .with_context(|| format!("loading {}", path.display()))
        .index()
}

/// One name per line; blank lines and `#` comments are skipped. Names that
/// do not parse are logged and dropped.
pub(crate) fn read_names(path: &Path) -> Result<Vec<Fqdn>> {
    let file = File::open(path).with_context(|| format!("opening name list {}", path.display())).input()?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display())).input()?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match Fqdn::parse(line, rules()) {
            Ok(f) => out.push(f),
            Err(e) => log::warn!("{}:{}: skipping {line:?}: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Creates `path` (and its parent directory) for writing.
pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub(crate) fn rank_map(rows: &[RankedDomain]) -> HashMap<String, u32> {
    let mut map = HashMap::with_capacity(rows.len());
    for r in rows {
        if let Ok(f) = Fqdn::parse(&r.domain, rules()) {
            map.entry(f.raw().to_string()).or_insert(r.rank);
        }
    }
    map
}

