use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use squatwatch::domain::{Fqdn, SquattingType};
use squatwatch::report::{percent, VerdictRecord};
use squatwatch::squat::Dataset;

use super::detect::{baseline_records, Pipeline};
use super::{detector, reference_rows, rules, write_json};
use crate::config::Config;
use crate::exit::{Classify, PARTIAL};

#[derive(Debug, Serialize)]
struct TypeRow {
    kind: &'static str,
    labeled: usize,
    correct: usize,
    accuracy: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    detector: String,
    rows: Vec<TypeRow>,
    total: TypeRow,
    benign: usize,
    false_positives: usize,
    rejected_chunks: usize,
    wall_ms: u128,
}

fn render(r: &EvalReport) -> String {
    let mut out = format!("{:<8} {:>8} {:>8} {:>9}\n", "type", "labeled", "correct", "accuracy");
    for row in r.rows.iter().chain(std::iter::once(&r.total)) {
        out.push_str(&format!("{:<8} {:>8} {:>8} {:>8.1}%\n", row.kind, row.labeled, row.correct, row.accuracy));
    }
    out.push_str(&format!(
        "benign {} false positives {} rejected chunks {} wall time {} ms\n",
        r.benign, r.false_positives, r.rejected_chunks, r.wall_ms
    ));
    out
}

pub fn run(config: &Config, dataset: &Path, baseline: bool) -> Result<ExitCode> {
    let file = File::open(dataset).with_context(|| format!("opening dataset {}", dataset.display())).input()?;
    let data = Dataset::read_jsonl(BufReader::new(file)).input()?;
    if data.is_empty() {
        return Err(anyhow::anyhow!("no labels in {}", dataset.display())).input();
    }
    let inputs: Vec<Fqdn> = data
        .entries
        .iter()
        .map(|e| Fqdn::parse(&e.fqdn, rules()).with_context(|| format!("dataset name {:?}", e.fqdn)))
        .collect::<Result<_>>()
        .input()?;
    let started = Instant::now();
    let (records, rejected, label): (Vec<VerdictRecord>, usize, String) = if baseline {
        let rows = reference_rows(config)?;
        let det = detector(config, &rows)?;
        (baseline_records(&det, &inputs), 0, "baseline".into())
    } else {
        let pipeline = Pipeline::load(config)?;
        let run = pipeline.run(&inputs)?;
        (run.records, run.chunks.rejected, config.backend.name())
    };
    let by_name: HashMap<&str, &VerdictRecord> = records.iter().map(|r| (r.input.as_str(), r)).collect();
    let mut rows: Vec<TypeRow> = SquattingType::NAMES
        .iter()
        .map(|k| TypeRow { kind: k, labeled: 0, correct: 0, accuracy: 0.0 })
        .collect();
    let (mut benign, mut false_positives) = (0, 0);
    for (entry, fqdn) in data.entries.iter().zip(&inputs) {
        let verdict = by_name.get(fqdn.raw());
        match (entry.kind, &entry.target) {
            (Some(kind), Some(target)) => {
                let row = rows.iter_mut().find(|r| r.kind == kind.name()).expect("every kind has a row");
                row.labeled += 1;
                if verdict.is_some_and(|v| v.kind == kind.name() && &v.target == target) {
                    row.correct += 1;
                }
            }
            _ => {
                benign += 1;
                false_positives += usize::from(verdict.is_some());
            }
        }
    }
    rows.retain(|r| r.labeled > 0);
    for r in &mut rows {
        r.accuracy = percent(r.correct, r.labeled);
    }
    let (labeled, correct) = rows.iter().fold((0, 0), |(l, c), r| (l + r.labeled, c + r.correct));
    let report = EvalReport {
        detector: label,
        total: TypeRow { kind: "total", labeled, correct, accuracy: percent(correct, labeled) },
        rows,
        benign,
        false_positives,
        rejected_chunks: rejected,
        wall_ms: started.elapsed().as_millis(),
    };
    write_json(&config.output.eval, &report)?;
    print!("{}", render(&report));
    Ok(if rejected > 0 { ExitCode::from(PARTIAL) } else { ExitCode::SUCCESS })
}
