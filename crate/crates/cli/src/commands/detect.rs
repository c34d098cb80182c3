use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use squatwatch::dnx::{pair_inputs, sort_and_chunk, Embedder, ReferenceIndex};
use squatwatch::domain::Fqdn;
use squatwatch::llm::{ChatBackend, FixedReplyBackend, HttpChatBackend, OracleBackend};
use squatwatch::report::{emit_verdicts, summarize, ChunkCounts, VerdictRecord};
use squatwatch::squat::Detector;
use squatwatch::trv::{run_chunks, AllowlistChecker, ChunkResult, FeedbackTemplates, MustPassPool, TokenTotals, TrvConfig, TrvContext};

use super::{create, detector, embedder, load_index, rank_map, read_names, reference_rows, rules, write_json};
use crate::config::{BackendConfig, Config};
use crate::exit::{Classify, PARTIAL};

/// Everything loaded once per model-backed run.
pub struct Pipeline {
    pub rows: Vec<squatwatch::squat::RankedDomain>,
    embedder: Box<dyn Embedder>,
    index: ReferenceIndex,
    pool: MustPassPool,
    checker: AllowlistChecker,
    templates: FeedbackTemplates,
    backend: Box<dyn ChatBackend>,
    trv: TrvConfig,
    chunk_size: usize,
}

pub struct DetectRun {
    pub results: Vec<ChunkResult>,
    pub records: Vec<VerdictRecord>,
    pub tokens: TokenTotals,
    pub chunks: ChunkCounts,
}

fn backend(config: &Config, detector: &Arc<Detector>) -> Result<Box<dyn ChatBackend>> {
    Ok(match &config.backend {
        BackendConfig::Oracle { faults, .. } => Box::new(OracleBackend::new(detector.clone(), *faults).input()?),
        BackendConfig::Http(http) => {
            if std::env::var(&http.api_key_env).map_or(true, |v| v.is_empty()) {
                bail!("auth: environment variable {} with the model credential is not set", http.api_key_env);
            }
            Box::new(HttpChatBackend::new(http.clone()))
        }
        BackendConfig::Fixed { reply } => Box::new(FixedReplyBackend { reply: reply.clone() }),
    })
}

impl Pipeline {
    pub fn load(config: &Config) -> Result<Pipeline> {
        let rows = reference_rows(config)?;
        let detector = detector(config, &rows)?;
        let embedder = embedder(config)?;
        let index = load_index(config, embedder.as_ref())?;
        let pool = MustPassPool::build(&detector, config.pipeline.must_pass_top).input()?;
        let checker = match &config.reference.allowlist {
            Some(path) => {
                let file = File::open(path).with_context(|| format!("opening allowlist {}", path.display())).input()?;
                AllowlistChecker::from_reader(BufReader::new(file)).input()?
            }
            None => AllowlistChecker::default(),
        };
        let templates = match &config.pipeline.feedback {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).input()?;
                FeedbackTemplates::parse(&text).input()?
            }
            None => FeedbackTemplates::bundled(),
        };
        let backend = backend(config, &detector).input()?;
        let p = &config.pipeline;
        let trv = TrvConfig {
            max_attempts: p.max_attempts,
            max_output_tokens: p.max_output_tokens,
            temperature: p.temperature,
            in_flight: config.backend.in_flight(),
        };
        Ok(Pipeline { rows, embedder, index, pool, checker, templates, backend, trv, chunk_size: p.chunk_size })
    }

    pub fn run(&self, inputs: &[Fqdn]) -> Result<DetectRun> {
        let started = Instant::now();
        let pairs = pair_inputs(inputs, &self.index, self.embedder.as_ref()).context("pairing inputs")?;
        let chunks = sort_and_chunk(pairs, self.chunk_size);
        log::info!("{} names in {} chunks, paired in {:?}", inputs.len(), chunks.len(), started.elapsed());
        let ctx = TrvContext {
            pool: &self.pool,
            index: &self.index,
            checker: &self.checker,
            templates: &self.templates,
            rules: rules(),
            config: self.trv,
        };
        let results = run_chunks(&chunks, &ctx, self.backend.as_ref())?;
        let mut tokens = TokenTotals::default();
        let mut counts = ChunkCounts::default();
        let mut records = Vec::new();
        for r in &results {
            tokens.merge(&r.tokens);
            if r.accepted() {
                counts.accepted += 1;
                records.extend(r.outcome.verdicts.iter().map(|v| VerdictRecord::new(v, Some(r.chunk_id), Some(r.attempts_used))));
            } else {
                counts.rejected += 1;
                log::info!("chunk {} rejected after {} attempts: {:?}", r.chunk_id, r.attempts_used, r.history);
            }
        }
        log::info!("validation finished in {:?}", started.elapsed());
        Ok(DetectRun { results, records, tokens, chunks: counts })
    }
}

pub fn run_detect(config: &Config, input: &Path, out: &Path) -> Result<ExitCode> {
    let inputs = read_names(input)?;
    let pipeline = Pipeline::load(config)?;
    let run = pipeline.run(&inputs)?;
    emit_verdicts(&run.records, create(out)?)?;
    let ranks = rank_map(&pipeline.rows);
    let summary = summarize(&run.records, |t| ranks.get(t).copied())
        .with_chunks(run.chunks, run.tokens)
        .with_cost(&config.cost.model()?);
    write_json(&config.output.summary, &summary)?;
    print!("{}", summary.render_text());
    println!("verdicts {} -> {}", run.records.len(), out.display());
    if run.chunks.rejected > 0 {
        eprintln!("{} of {} chunks were not accepted; their names are missing from the output", run.chunks.rejected, run.results.len());
        return Ok(ExitCode::from(PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

/// Rule-based verdicts, without hybrid analysis.
pub fn baseline_records(detector: &Detector, inputs: &[Fqdn]) -> Vec<VerdictRecord> {
    inputs
        .iter()
        .filter_map(|f| detector.baseline_detect(f, rules()))
        .map(|v| VerdictRecord::new(&v, None, None))
        .collect()
}

pub fn run_baseline(config: &Config, input: &Path, out: &Path) -> Result<ExitCode> {
    let inputs = read_names(input)?;
    let rows = reference_rows(config)?;
    let detector = detector(config, &rows)?;
    let records = baseline_records(&detector, &inputs);
    emit_verdicts(&records, create(out)?)?;
    let ranks = rank_map(&rows);
    let summary = summarize(&records, |t| ranks.get(t).copied());
    print!("{}", summary.render_text());
    println!("verdicts {} -> {}", records.len(), out.display());
    Ok(ExitCode::SUCCESS)
}
