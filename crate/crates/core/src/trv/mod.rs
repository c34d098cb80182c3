//! Validation of model output: control entries woven into every chunk,
//! prompt assembly, four ordered checks, and bounded re-runs with feedback.

mod mustpass;
pub mod prompt;
mod validate;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mustpass::{inject, injection_positions, Augmented, AugmentedEntry, Expected, MustPassEntry, MustPassPool};
pub use prompt::build_prompt;
pub use validate::{
    check_consistency, validate_format, validate_response, verify_must_pass, verify_targets, AllowlistChecker, Finding,
    RawFinding, RejectCode, Rejection, TargetChecker,
};

use crate::dnx::{Chunk, ReferenceIndex};
use crate::domain::{Verdict, VerdictSource};
use crate::llm::{ChatBackend, LlmResponse};
use crate::psl::SuffixRules;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrvError {
    #[error("only {eligible} brands qualify as control entries; at least 4 are needed")]
    MustPassPool { eligible: usize },
    #[error("feedback templates line {line}: {reason}")]
    Templates { line: usize, reason: String },
    #[error("could not start worker pool: {0}")]
    Workers(String),
}

/// Fixed texts sent back to the model after a rejection, keyed by
/// [`RejectCode::code`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackTemplates {
    texts: BTreeMap<String, String>,
}

impl FeedbackTemplates {
    /// Parses `code<TAB>text` lines; `#` starts a comment. Every code must
    /// be present.
    pub fn parse(text: &str) -> Result<FeedbackTemplates, TrvError> {
        let mut texts = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (code, body) = line
                .split_once('\t')
                .ok_or_else(|| TrvError::Templates { line: i + 1, reason: "expected code<TAB>text".into() })?;
            if body.trim().is_empty() {
                return Err(TrvError::Templates { line: i + 1, reason: "empty text".into() });
            }
            texts.insert(code.trim().to_string(), body.trim().to_string());
        }
        if let Some(missing) = RejectCode::ALL.iter().find(|c| !texts.contains_key(c.code())) {
            return Err(TrvError::Templates { line: 0, reason: format!("missing code {}", missing.code()) });
        }
        Ok(FeedbackTemplates { texts })
    }

    pub fn bundled() -> FeedbackTemplates {
        FeedbackTemplates::parse(include_str!("../../data/feedback.tsv")).expect("bundled templates parse")
    }

    pub fn text(&self, code: RejectCode) -> &str {
        &self.texts[code.code()]
    }
}

impl Default for FeedbackTemplates {
    fn default() -> Self {
        FeedbackTemplates::bundled()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrvConfig {
    pub max_attempts: u32,
    pub max_output_tokens: u32,
    pub temperature: f64,
    /// Chunks processed at once.
    pub in_flight: usize,
}

impl Default for TrvConfig {
    fn default() -> Self {
        TrvConfig { max_attempts: 3, max_output_tokens: 8192, temperature: 0.0, in_flight: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Accepted,
    FormatError,
    ConsistencyError,
    MustPassError,
    TargetExistenceError,
    TransportError,
}

impl From<RejectCode> for Status {
    fn from(code: RejectCode) -> Status {
        match code {
            RejectCode::Format => Status::FormatError,
            RejectCode::Consistency => Status::ConsistencyError,
            RejectCode::MustPass => Status::MustPassError,
            RejectCode::Target => Status::TargetExistenceError,
            RejectCode::Transport => Status::TransportError,
        }
    }
}

/// Result of one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub status: Status,
    /// Verdicts for the chunk's own names; empty unless accepted.
    pub verdicts: Vec<Verdict>,
    /// Feedback text for the next attempt; empty when accepted.
    pub feedback: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub input: u64,
    pub output: u64,
    pub calls: u64,
}

impl TokenTotals {
    fn add(&mut self, r: &LlmResponse) {
        self.input += r.input_tokens;
        self.output += r.output_tokens;
        self.calls += 1;
    }

    pub fn merge(&mut self, other: &TokenTotals) {
        self.input += other.input;
        self.output += other.output;
        self.calls += other.calls;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkResult {
    pub chunk_id: usize,
    pub outcome: ValidationOutcome,
    pub attempts_used: u32,
    pub tokens: TokenTotals,
    /// Status of every attempt, in order.
    pub history: Vec<Status>,
}

impl ChunkResult {
    pub fn accepted(&self) -> bool {
        self.outcome.status == Status::Accepted
    }
}

/// Everything the attempt loop needs besides the chunk and the backend.
pub struct TrvContext<'a> {
    pub pool: &'a MustPassPool,
    pub index: &'a ReferenceIndex,
    pub checker: &'a dyn TargetChecker,
    pub templates: &'a FeedbackTemplates,
    pub rules: &'a SuffixRules,
    pub config: TrvConfig,
}

/// Verdicts for the chunk's own names. A control name is kept only when
/// the chunk also contains it as an input.
fn accepted_verdicts(findings: Vec<Finding>, augmented: &Augmented, rules: &SuffixRules) -> Vec<Verdict> {
    let own: HashSet<String> = augmented.strip().into_iter().map(|p| p.input.raw().to_string()).collect();
    findings
        .into_iter()
        .filter(|f| own.contains(f.fqdn.raw()))
        .filter_map(|f| match Verdict::new(f.fqdn, f.kind, &f.target, VerdictSource::Llm, rules) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("dropping validated finding: {e}");
                None
            }
        })
        .collect()
}

pub fn process_chunk(chunk: &Chunk, ctx: &TrvContext<'_>, backend: &dyn ChatBackend) -> ChunkResult {
    let augmented = inject(chunk, &ctx.pool.select(chunk.id));
    let references: Vec<&str> = chunk.pairs.iter().map(|p| p.proximate.as_str()).collect();
    let max_attempts = ctx.config.max_attempts.max(1);
    let mut tokens = TokenTotals::default();
    let mut feedback = Vec::new();
    let mut history = Vec::new();
    let mut outcome = None;
    for attempt in 1..=max_attempts {
        let reply = build_prompt(&augmented, &references, &feedback, ctx.config.max_output_tokens, ctx.config.temperature)
            .and_then(|req| backend.chat(&req));
        let result = match reply {
            Ok(resp) => {
                tokens.add(&resp);
                validate_response(&resp.text, &augmented, ctx.index, ctx.checker, ctx.rules)
            }
            Err(e) => Err(Rejection { code: RejectCode::Transport, detail: e.to_string() }),
        };
        match result {
            Ok(findings) => {
                history.push(Status::Accepted);
                outcome = Some(ValidationOutcome {
                    status: Status::Accepted,
                    verdicts: accepted_verdicts(findings, &augmented, ctx.rules),
                    feedback: String::new(),
                    attempt,
                });
                break;
            }
            Err(rej) => {
                log::info!("chunk {} attempt {attempt}: {} ({})", chunk.id, rej.code.code(), rej.detail);
                let text = ctx.templates.text(rej.code).to_string();
                feedback.push(prompt::feedback_line(attempt, &text));
                history.push(rej.code.into());
                outcome = Some(ValidationOutcome { status: rej.code.into(), verdicts: Vec::new(), feedback: text, attempt });
            }
        }
    }
    let outcome = outcome.expect("at least one attempt");
    ChunkResult { chunk_id: chunk.id, attempts_used: outcome.attempt, outcome, tokens, history }
}

/// Runs every chunk with at most `config.in_flight` in progress; results
/// come back in chunk order.
pub fn run_chunks(chunks: &[Chunk], ctx: &TrvContext<'_>, backend: &dyn ChatBackend) -> Result<Vec<ChunkResult>, TrvError> {
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.config.in_flight.max(1))
        .build()
        .map_err(|e| TrvError::Workers(e.to_string()))?;
    let mut results: Vec<ChunkResult> = workers.install(|| chunks.par_iter().map(|c| process_chunk(c, ctx, backend)).collect());
    results.sort_by_key(|r| r.chunk_id);
    Ok(results)
}

#[cfg(test)]
mod tests;
