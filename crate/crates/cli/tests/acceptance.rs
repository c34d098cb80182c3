//! Exit-gate suite: prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Set `SQUATWATCH_LIVE_CONFIG` to a config file with a real chat backend to
//! run the live check; it is skipped otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squatwatch::dnx::{pair_inputs, sort_and_chunk, Chunk, DomainPair, Embedder, LocalEmbedder, ReferenceIndex};
use squatwatch::ingest::{filter_active, FeedRecord, FeedSource, RrSet, RrType};
use squatwatch::llm::{FaultProfile, OracleBackend};
use squatwatch::report::{read_verdicts, CostModel};
use squatwatch::squat::{build_ground_truth, gen_bit, sample_reference, BrandSet, DatasetSpec, Detector, GeneratorTables, Quotas, RankedDomain};
use squatwatch::squat::Dataset;
use squatwatch::trv::{inject, run_chunks, AllowlistChecker, AugmentedEntry, FeedbackTemplates, MustPassPool, Status, TrvConfig, TrvContext};
use squatwatch::{Fqdn, SuffixRules};

const BIN: &str = env!("CARGO_BIN_EXE_squatwatch");

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Scratch {
    dir: tempfile::TempDir,
}

impl Scratch {
    fn new(extra: &str) -> Scratch {
        let dir = tempfile::tempdir().expect("tempdir");
        let rows: String = sample_reference().iter().map(|r| format!("{},{}\n", r.rank, r.domain)).collect();
        fs::write(dir.path().join("ref.csv"), rows).expect("write reference");
        let config = format!("seed = 17\n[reference]\nlist = \"ref.csv\"\nindex = \"ref.sqix\"\n{extra}");
        fs::write(dir.path().join("squatwatch.toml"), config).expect("write config");
        Scratch { dir }
    }

    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }

    fn read(&self, name: &str) -> Result<String, String> {
        fs::read_to_string(self.path(name)).map_err(|e| format!("{name}: {e}"))
    }

    fn run(&self, args: &[&str]) -> Output {
        run_with(&self.path("squatwatch.toml"), self.dir.path(), args)
    }

    fn expect(&self, args: &[&str], want: i32) -> Result<Output, String> {
        let out = self.run(args);
        let got = out.status.code().unwrap_or(-1);
        ensure(got == want, || format!("`{}` exited {got}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))?;
        Ok(out)
    }

    fn json(&self, name: &str) -> Result<serde_json::Value, String> {
        serde_json::from_str(&self.read(name)?).map_err(|e| format!("{name}: {e}"))
    }
}

fn run_with(config: &Path, cwd: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("--config").arg(config).args(args).current_dir(cwd).env_remove("RUST_LOG").output().expect("spawn squatwatch")
}

fn rules() -> &'static SuffixRules {
    SuffixRules::bundled()
}

fn oracle_equivalence() -> Check {
    let s = Scratch::new("[dataset]\nbrand_limit = 50\nbenign = 1000\n");
    s.expect(&["dataset"], 0)?;
    let data = Dataset::read_jsonl(s.read("dataset.jsonl")?.as_bytes()).map_err(|e| e.to_string())?;
    let squats = data.entries.iter().filter(|e| e.kind.is_some()).count();
    ensure(squats == 1649 && data.len() == 2649, || format!("dataset has {squats} squats of {}", data.len()))?;
    s.expect(&["index"], 0)?;
    let started = Instant::now();
    s.expect(&["eval"], 0)?;
    let wall = started.elapsed();
    let report = s.json("eval.json")?;
    for row in report["rows"].as_array().ok_or("rows missing")? {
        let labeled = row["labeled"].as_u64().unwrap_or(0);
        ensure(labeled == 0 || row["correct"].as_u64() == Some(labeled), || format!("type row {row}"))?;
    }
    ensure(report["total"]["correct"] == 1649, || format!("total {}", report["total"]))?;
    ensure(report["false_positives"] == 0, || format!("false positives {}", report["false_positives"]))?;
    ensure(wall < Duration::from_secs(60), || format!("eval took {wall:?}"))?;
    Ok(format!("1649/1649 correct, 0 false positives, {} ms", wall.as_millis()))
}

struct TrvWorld {
    detector: Arc<Detector>,
    index: ReferenceIndex,
    pool: MustPassPool,
    chunks: Vec<Chunk>,
    templates: FeedbackTemplates,
    checker: AllowlistChecker,
}

impl TrvWorld {
    fn new() -> TrvWorld {
        let rows = sample_reference();
        let tables = GeneratorTables::bundled();
        let detector = Arc::new(Detector::new(BrandSet::from_ranked(&rows, rows.len(), rules()).unwrap(), &tables));
        let spec = DatasetSpec { brand_limit: 50, quotas: Quotas::STANDARD, benign: 1000, seed: 21 };
        let data = build_ground_truth(&detector, &spec, &tables, rules()).unwrap();
        let inputs: Vec<Fqdn> = data.entries.iter().map(|e| Fqdn::parse(&e.fqdn, rules()).unwrap()).collect();
        let embedder = LocalEmbedder::default();
        let index = ReferenceIndex::build(&rows, &embedder, rules()).unwrap();
        let chunks = sort_and_chunk(pair_inputs(&inputs, &index, &embedder).unwrap(), 100);
        let pool = MustPassPool::build(&detector, 100).unwrap();
        TrvWorld { detector, index, pool, chunks, templates: FeedbackTemplates::bundled(), checker: AllowlistChecker::default() }
    }

    fn run(&self, faults: FaultProfile) -> Vec<squatwatch::trv::ChunkResult> {
        let ctx = TrvContext {
            pool: &self.pool,
            index: &self.index,
            checker: &self.checker,
            templates: &self.templates,
            rules: rules(),
            config: TrvConfig::default(),
        };
        run_chunks(&self.chunks, &ctx, &OracleBackend::new(self.detector.clone(), faults).unwrap()).unwrap()
    }
}

fn hallucination_defense() -> Check {
    let w = TrvWorld::new();
    let faults = FaultProfile { hallucinate: 0.5, seed: 7, active_attempts: 1, ..FaultProfile::NONE };
    let results = w.run(faults);
    let mut retried = 0;
    for r in &results {
        ensure(r.accepted(), || format!("chunk {} not accepted: {:?}", r.chunk_id, r.history))?;
        retried += usize::from(r.attempts_used > 1);
        let chunk = &w.chunks[r.chunk_id];
        let inputs: BTreeSet<&str> = chunk.pairs.iter().map(|p| p.input.raw()).collect();
        let controls = w.pool.select(r.chunk_id);
        for v in &r.outcome.verdicts {
            ensure(inputs.contains(v.fqdn.raw()), || format!("chunk {}: {} is not an input", r.chunk_id, v.fqdn))?;
        }
        for c in &controls {
            let is_input = inputs.contains(c.fqdn.raw());
            let flagged = r.outcome.verdicts.iter().any(|v| v.fqdn == c.fqdn);
            ensure(!flagged || is_input, || format!("chunk {}: control {} leaked", r.chunk_id, c.fqdn))?;
        }
    }
    ensure(retried > 0, || "no chunk needed a second attempt".into())?;

    let corrupt = FaultProfile { corrupt_format: 1.0, seed: 7, ..FaultProfile::NONE };
    let results = w.run(corrupt);
    for r in &results {
        ensure(!r.accepted() && r.attempts_used == 3, || format!("chunk {} history {:?}", r.chunk_id, r.history))?;
        ensure(r.history == vec![Status::FormatError; 3], || format!("chunk {} history {:?}", r.chunk_id, r.history))?;
    }
    Ok(format!("{} chunks clean, {retried} retried; {} of {} rejected after 3 attempts", w.chunks.len(), results.len(), w.chunks.len()))
}

fn must_pass_placement() -> Check {
    let w = TrvWorld::new();
    let mut full = 0;
    for chunk in &w.chunks {
        let controls = w.pool.select(chunk.id);
        let aug = inject(chunk, &controls);
        if chunk.pairs.len() == 100 {
            full += 1;
            ensure(aug.injected == vec![26, 51, 76, 101], || format!("chunk {} positions {:?}", chunk.id, aug.injected))?;
            for (i, pos) in [26, 51, 76, 101].into_iter().enumerate() {
                let at = &aug.entries[pos - 1];
                ensure(matches!(at, AugmentedEntry::MustPass(e) if *e == controls[i]), || format!("chunk {} position {pos}", chunk.id))?;
            }
        }
        ensure(aug.entries.len() == chunk.pairs.len() + 4, || format!("chunk {} length", chunk.id))?;
        let stripped = aug.strip();
        ensure(format!("{stripped:?}") == format!("{:?}", chunk.pairs), || format!("chunk {} strip differs", chunk.id))?;
    }
    ensure(full > 0, || "no full chunks".into())?;
    Ok(format!("{full} full chunks at 26/51/76/101, {} round-trips exact", w.chunks.len()))
}

/// Every single-bit flip of every byte, kept when the result is still a
/// valid LDH label.
fn flip_oracle(label: &str) -> BTreeSet<String> {
    let bytes = label.as_bytes();
    let mut out = BTreeSet::new();
    for i in 0..bytes.len() {
        for bit in 0..8 {
            let mut b = bytes.to_vec();
            b[i] ^= 1 << bit;
            let ldh = b.iter().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == b'-');
            if ldh && b[0] != b'-' && b[b.len() - 1] != b'-' && b != bytes {
                out.insert(String::from_utf8(b).unwrap());
            }
        }
    }
    out
}

fn bit_generator() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet: Vec<u8> = (b'a'..=b'z').chain(b'0'..=b'9').collect();
    for _ in 0..100 {
        let len = rng.gen_range(1..=20);
        let mut label: Vec<u8> = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        if len > 2 && rng.gen_bool(0.3) {
            label[len / 2] = b'-';
        }
        let label = String::from_utf8(label).unwrap();
        let (got, want) = (gen_bit(&label), flip_oracle(&label));
        ensure(got == want, || format!("{label}: {} generated vs {} expected", got.len(), want.len()))?;
    }
    ensure(gen_bit("example").contains("exemple"), || "example lacks exemple".into())?;
    Ok("100 labels equal; example -> exemple".into())
}

fn nearest_neighbor() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tlds = ["com", "net", "org", "io", "de", "co.uk"];
    let mut names = BTreeSet::new();
    while names.len() < 100_000 {
        let len = rng.gen_range(3..=12);
        let label: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
        names.insert(format!("{label}.{}", tlds[rng.gen_range(0..tlds.len())]));
    }
    let mut names: Vec<String> = names.into_iter().collect();
    names.shuffle(&mut rng);
    let rows: Vec<RankedDomain> = names.into_iter().enumerate().map(|(i, domain)| RankedDomain { rank: i as u32 + 1, domain }).collect();
    let embedder = LocalEmbedder::default();
    let index = ReferenceIndex::build(&rows, &embedder, rules()).map_err(|e| e.to_string())?;
    ensure(index.len() == 100_000, || format!("index has {}", index.len()))?;

    let texts: Vec<String> = (0..1000)
        .map(|_| {
            let len = rng.gen_range(3..=14);
            (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
        })
        .collect();
    let queries = embedder.embed_batch(&texts).map_err(|e| e.to_string())?;
    let mut scores: Vec<(f64, u32, usize)> = Vec::with_capacity(index.len());
    for (q, text) in queries.iter().zip(&texts) {
        let k = 10;
        scores.clear();
        scores.extend((0..index.len()).map(|e| (index.similarity_to(q, e), index.rank(e), e)));
        let order = |a: &(f64, u32, usize), b: &(f64, u32, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        scores.select_nth_unstable_by(k - 1, order);
        scores[..k].sort_by(order);
        let want: Vec<usize> = scores[..k].iter().map(|s| s.2).collect();
        let got: Vec<usize> = index.nearest(q, k).map_err(|e| e.to_string())?.iter().map(|n| n.entry).collect();
        ensure(got == want, || format!("query {text:?}: {got:?} vs {want:?}"))?;
    }
    let mut worst = 0.0f64;
    for e in (0..index.len()).step_by(97) {
        let hit = &index.nearest(index.vector(e), 1).map_err(|e| e.to_string())?[0];
        worst = worst.max((hit.similarity - 1.0).abs());
        ensure((index.similarity_to(index.vector(e), e) - 1.0).abs() <= 1e-9, || format!("entry {e} self-similarity"))?;
    }
    ensure(worst <= 1e-9, || format!("self-query deviation {worst:e}"))?;
    Ok(format!("1000 queries exact over 100000 entries; max self deviation {worst:.1e}"))
}

fn chunk_partition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let proximates: Vec<String> = (0..50).map(|i| format!("brand{i}.com")).collect();
    let mut sizes: Vec<usize> = (0..25).map(|_| rng.gen_range(1..=10_007)).collect();
    sizes.extend([1, 2, 7, 100, 101, 10_007]);
    let mut checked = 0;
    for &n in &sizes {
        let pairs: Vec<DomainPair> = (0..n)
            .map(|_| {
                let name = format!("x{}.example{}.com", rng.gen_range(0..5000), rng.gen_range(0..3));
                DomainPair {
                    input: Fqdn::parse(&name, rules()).unwrap(),
                    proximate: proximates[rng.gen_range(0..proximates.len())].clone(),
                    similarity: rng.gen_range(0.0..1.0),
                }
            })
            .collect();
        let mut want: Vec<(String, String, u64)> = pairs.iter().map(|p| (p.proximate.clone(), p.input.raw().to_string(), p.similarity.to_bits())).collect();
        want.sort();
        for size in [1, 7, 100] {
            let chunks = sort_and_chunk(pairs.clone(), size);
            ensure(chunks.len() == n.div_ceil(size), || format!("n={n} size={size}: {} chunks", chunks.len()))?;
            for (i, c) in chunks.iter().enumerate() {
                let expected = if i + 1 == chunks.len() { n - i * size } else { size };
                ensure(c.id == i && c.pairs.len() == expected, || format!("n={n} size={size}: chunk {i}"))?;
            }
            let flat: Vec<&DomainPair> = chunks.iter().flat_map(|c| &c.pairs).collect();
            let order: Vec<(&str, &str)> = flat.iter().map(|p| (p.proximate.as_str(), p.input.raw())).collect();
            let want_order: Vec<(&str, &str)> = want.iter().map(|w| (w.0.as_str(), w.1.as_str())).collect();
            ensure(order == want_order, || format!("n={n} size={size}: order differs"))?;
            let mut got: Vec<(String, String, u64)> = flat.iter().map(|p| (p.proximate.clone(), p.input.raw().to_string(), p.similarity.to_bits())).collect();
            got.sort();
            ensure(got == want, || format!("n={n} size={size}: multiset differs"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} partitions over {} input sizes", sizes.len()))
}

fn cost_arithmetic() -> Check {
    let mut seen = Vec::new();
    for (name, want) in [("gpt-3.5-turbo", "$40.00"), ("gpt-4o", "$400.00"), ("llama-3-70b", "$37.40")] {
        let model = CostModel::preset(name).ok_or_else(|| format!("no preset {name}"))?;
        let got = model.estimate(50_000_000, 10_000_000).to_string();
        ensure(got == want, || format!("{name}: {got}"))?;
        seen.push(format!("{name} {got}"));
    }
    Ok(seen.join(", "))
}

fn hybrid_blindness() -> Check {
    let s = Scratch::new("");
    s.expect(&["dataset", "--hybrid", "20", "--out", "hybrid.txt"], 0)?;
    let n = s.read("hybrid.txt")?.lines().filter(|l| !l.is_empty()).count();
    ensure(n == 20, || format!("fixture has {n} names"))?;
    s.expect(&["index"], 0)?;
    s.expect(&["baseline", "--input", "hybrid.txt"], 0)?;
    let count = |name: &str| -> Result<usize, String> {
        let records = read_verdicts(s.read(name)?.as_bytes()).map_err(|e| e.to_string())?;
        Ok(records.iter().filter(|r| r.kind == "hybrid").count())
    };
    let baseline = count("baseline.jsonl")?;
    s.expect(&["detect", "--input", "hybrid.txt"], 0)?;
    let detected = count("verdicts.jsonl")?;
    ensure(baseline == 0, || format!("baseline found {baseline} hybrids"))?;
    ensure(detected >= 18, || format!("detect found {detected} hybrids"))?;
    Ok(format!("baseline 0 hybrid, detect {detected}/20 hybrid"))
}

fn ingestion_filter() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let kinds = [RrType::Ns, RrType::A, RrType::Aaaa];
    let sources = [FeedSource::CtLog, FeedSource::Pdns, FeedSource::Zone];
    let mut records = Vec::new();
    let mut evidence: BTreeMap<String, (bool, bool)> = BTreeMap::new();
    for i in 0..2000 {
        let name = format!("host{}.site{}.com", i % 700, i % 13);
        let source = sources[rng.gen_range(0..3)];
        let types: Vec<RrType> = if source == FeedSource::CtLog { Vec::new() } else { kinds.iter().copied().filter(|_| rng.gen_bool(0.4)).collect() };
        let entry = evidence.entry(name.clone()).or_default();
        entry.0 |= types.contains(&RrType::Ns);
        entry.1 |= types.contains(&RrType::A) || types.contains(&RrType::Aaaa);
        records.push(FeedRecord { fqdn: name, source, rr_types: RrSet::of(&types), observed_at: Some(1_700_000_000 + i) });
    }
    let want: BTreeSet<String> = evidence.iter().filter(|(_, (ns, addr))| *ns && *addr).map(|(n, _)| n.clone()).collect();
    let base: Vec<String> = filter_active(records.clone(), rules()).iter().map(|f| f.raw().to_string()).collect();
    let got: BTreeSet<String> = base.iter().cloned().collect();
    ensure(got.len() == base.len(), || "duplicate names in output".into())?;
    ensure(got == want, || format!("{} names kept, {} expected", got.len(), want.len()))?;
    for _ in 0..20 {
        records.shuffle(&mut rng);
        let again: Vec<String> = filter_active(records.clone(), rules()).iter().map(|f| f.raw().to_string()).collect();
        ensure(again == base, || "shuffled input changed the output".into())?;
    }
    Ok(format!("{} of {} names kept; 20 shuffles identical", want.len(), evidence.len()))
}

fn live_harness() -> Option<Check> {
    let config = std::env::var_os("SQUATWATCH_LIVE_CONFIG")?;
    let config = Path::new(&config).canonicalize().map_err(|e| e.to_string());
    Some(config.and_then(|config| {
        let cwd = config.parent().unwrap_or(Path::new("."));
        let out = run_with(&config, cwd, &["eval"]);
        let code = out.status.code().unwrap_or(-1);
        ensure(code == 0 || code == 4, || format!("eval exited {code}: {}", String::from_utf8_lossy(&out.stderr).trim()))?;
        Ok(format!("eval completed with exit {code}"))
    }))
}

fn main() -> ExitCode {
    let checks: [Criterion; 9] = [
        ("oracle end-to-end equivalence", oracle_equivalence),
        ("hallucination defense", hallucination_defense),
        ("must-pass placement", must_pass_placement),
        ("bit-squat generator", bit_generator),
        ("nearest-neighbour exactness", nearest_neighbor),
        ("chunk partition", chunk_partition),
        ("cost arithmetic", cost_arithmetic),
        ("baseline hybrid blindness", hybrid_blindness),
        ("ingestion filter", ingestion_filter),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    match live_harness() {
        None => println!("SKIP 10 live chat backend: SQUATWATCH_LIVE_CONFIG not set"),
        Some(Ok(detail)) => println!("PASS 10 live chat backend: {detail}"),
        Some(Err(why)) => {
            failed += 1;
            println!("FAIL 10 live chat backend: {why}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
