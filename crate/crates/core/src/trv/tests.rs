use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use super::*;
use crate::dnx::{pair_inputs, sort_and_chunk, LocalEmbedder};
use crate::domain::Fqdn;
use crate::llm::{FaultProfile, LlmError, LlmRequest, OracleBackend, ScriptedBackend};
use crate::squat::{build_ground_truth, sample_reference, BrandSet, DatasetSpec, Detector, GeneratorTables, Quotas};

struct World {
    detector: Arc<Detector>,
    index: ReferenceIndex,
    pool: MustPassPool,
    chunks: Vec<Chunk>,
    templates: FeedbackTemplates,
    checker: AllowlistChecker,
}

impl World {
    fn new(chunk_size: usize) -> World {
        let rules = SuffixRules::bundled();
        let rows = sample_reference();
        let tables = GeneratorTables::bundled();
        let detector = Arc::new(Detector::new(BrandSet::from_ranked(&rows, rows.len(), rules).unwrap(), &tables));
        let quotas = Quotas { typo: 40, combo: 40, homo: 30, bit: 20, sound: 10, tld: 20, level: 10, hybrid: 10 };
        let spec = DatasetSpec { brand_limit: 30, quotas, benign: 80, seed: 3 };
        let data = build_ground_truth(&detector, &spec, &tables, rules).unwrap();
        let inputs: Vec<Fqdn> = data.entries.iter().map(|e| Fqdn::parse(&e.fqdn, rules).unwrap()).collect();
        let embedder = LocalEmbedder::default();
        let index = ReferenceIndex::build(&rows, &embedder, rules).unwrap();
        let chunks = sort_and_chunk(pair_inputs(&inputs, &index, &embedder).unwrap(), chunk_size);
        let pool = MustPassPool::build(&detector, 100).unwrap();
        World { detector, index, pool, chunks, templates: FeedbackTemplates::bundled(), checker: AllowlistChecker::default() }
    }

    fn ctx(&self) -> TrvContext<'_> {
        TrvContext {
            pool: &self.pool,
            index: &self.index,
            checker: &self.checker,
            templates: &self.templates,
            rules: SuffixRules::bundled(),
            config: TrvConfig { in_flight: 2, ..TrvConfig::default() },
        }
    }

    fn oracle(&self, faults: FaultProfile) -> OracleBackend {
        OracleBackend::new(self.detector.clone(), faults).unwrap()
    }

    fn run(&self, faults: FaultProfile) -> Vec<ChunkResult> {
        run_chunks(&self.chunks, &self.ctx(), &self.oracle(faults)).unwrap()
    }
}

type VerdictKey = (String, &'static str, String);

fn keys(r: &ChunkResult) -> BTreeSet<VerdictKey> {
    r.outcome.verdicts.iter().map(|v| (v.fqdn.raw().to_string(), v.kind.name(), v.target.clone())).collect()
}

fn assert_accepted_is_clean(w: &World, r: &ChunkResult) {
    let chunk = &w.chunks[r.chunk_id];
    let inputs: BTreeSet<&str> = chunk.pairs.iter().map(|p| p.input.raw()).collect();
    let controls = w.pool.select(r.chunk_id);
    for v in &r.outcome.verdicts {
        assert!(inputs.contains(v.fqdn.raw()), "{} outside chunk", v.fqdn);
        assert!(w.index.contains(&v.target) || w.checker.exists(&v.target));
        if controls.iter().any(|c| c.fqdn == v.fqdn) {
            assert!(inputs.contains(v.fqdn.raw()), "control {} leaked", v.fqdn);
        }
    }
}

#[test]
fn zero_fault_oracle_matches_detector() {
    let w = World::new(100);
    let rules = SuffixRules::bundled();
    for r in w.run(FaultProfile::NONE) {
        assert!(r.accepted(), "chunk {} {:?}", r.chunk_id, r.history);
        assert_eq!(r.attempts_used, 1);
        let expected: BTreeSet<VerdictKey> = w.chunks[r.chunk_id]
            .pairs
            .iter()
            .filter_map(|p| {
                let v = w.detector.baseline_detect(&p.input, rules).filter(|_| w.detector.analyze_hybrid(&p.input).is_none());
                let det = w.detector.extended(&p.input)?;
                let kind = v.map_or(det.kind, |v| v.kind);
                Some((p.input.raw().to_string(), kind.name(), w.detector.brands().get(det.brand).registrable().to_string()))
            })
            .collect();
        assert_eq!(keys(&r), expected);
        assert!(r.tokens.input > 0 && r.tokens.calls == 1);
    }
}

#[test]
fn hallucinations_are_filtered_on_retry() {
    let w = World::new(100);
    let clean = w.run(FaultProfile::NONE);
    let faults = FaultProfile { hallucinate: 0.5, seed: 11, active_attempts: 1, ..FaultProfile::NONE };
    let results = w.run(faults);
    assert!(results.iter().any(|r| r.attempts_used == 2));
    for (r, c) in results.iter().zip(&clean) {
        assert!(r.accepted());
        assert_accepted_is_clean(&w, r);
        assert_eq!(keys(r), keys(c));
        if r.attempts_used == 2 {
            assert_eq!(r.history, vec![Status::ConsistencyError, Status::Accepted]);
        }
    }
}

#[test]
fn permanent_corruption_exhausts_attempts() {
    let w = World::new(100);
    let faults = FaultProfile { corrupt_format: 1.0, ..FaultProfile::NONE };
    for r in w.run(faults) {
        assert!(!r.accepted());
        assert_eq!(r.attempts_used, 3);
        assert_eq!(r.history, vec![Status::FormatError; 3]);
        assert!(r.outcome.verdicts.is_empty());
        assert_eq!(r.outcome.feedback, w.templates.text(RejectCode::Format));
    }
}

#[test]
fn any_fault_mix_accepts_only_clean_subsets() {
    let w = World::new(25);
    let clean = w.run(FaultProfile::NONE);
    for seed in 0..4 {
        let faults = FaultProfile { drop: 0.02, hallucinate: 0.3, corrupt_format: 0.2, fabricate_target: 0.3, seed, active_attempts: 0 };
        for (r, c) in w.run(faults).iter().zip(&clean) {
            if r.accepted() {
                assert_accepted_is_clean(&w, r);
                assert!(keys(r).is_subset(&keys(c)), "chunk {} seed {seed}", r.chunk_id);
            }
        }
    }
}

#[test]
fn transport_failures_count_as_attempts() {
    let w = World::new(100);
    let backend = ScriptedBackend::new(vec![Err(LlmError::Timeout { attempts: 3 })]);
    let r = process_chunk(&w.chunks[0], &w.ctx(), &backend);
    assert_eq!(r.attempts_used, 3);
    assert_eq!(r.history, vec![Status::TransportError; 3]);
    assert_eq!(r.outcome.feedback, w.templates.text(RejectCode::Transport));
    assert_eq!(r.tokens.calls, 0);
}

struct Recording {
    inner: OracleBackend,
    seen: Mutex<Vec<LlmRequest>>,
}

impl ChatBackend for Recording {
    fn name(&self) -> String {
        "recording".into()
    }

    fn chat(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.seen.lock().unwrap().push(request.clone());
        self.inner.chat(request)
    }
}

#[test]
fn feedback_accumulates_and_controls_repeat() {
    let w = World::new(100);
    let faults = FaultProfile { corrupt_format: 1.0, active_attempts: 2, ..FaultProfile::NONE };
    let backend = Recording { inner: w.oracle(faults), seen: Mutex::new(Vec::new()) };
    let r = process_chunk(&w.chunks[1], &w.ctx(), &backend);
    assert!(r.accepted());
    assert_eq!(r.attempts_used, 3);
    let seen = backend.seen.lock().unwrap();
    assert!(!seen[0].user_text.contains(prompt::FEEDBACK_HEADING));
    assert_eq!(seen[1].user_text.matches(prompt::REJECTION_PREFIX).count(), 1);
    assert_eq!(seen[2].user_text.matches(prompt::REJECTION_PREFIX).count(), 2);
    let inputs = |req: &LlmRequest| req.user_text.split(prompt::INPUT_HEADING).nth(1).unwrap().split(prompt::FEEDBACK_HEADING).next().unwrap().trim().to_string();
    assert_eq!(inputs(&seen[0]), inputs(&seen[2]));
}

#[test]
fn template_file_needs_every_code() {
    assert!(FeedbackTemplates::parse("F1\tx\nF2\tx\nF3\tx\nF4\tx\n").is_err());
    assert!(FeedbackTemplates::parse("F1 x").is_err());
    let t = FeedbackTemplates::parse("F1\ta\nF2\tb\nF3\tc\nF4\td\ntransport\te\n").unwrap();
    assert_eq!(t.text(RejectCode::Target), "d");
}
