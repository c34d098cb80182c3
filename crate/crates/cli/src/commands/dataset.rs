use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use squatwatch::squat::{build_ground_truth, hybrid_fixture, DatasetSpec, GeneratorTables};

use super::{create, detector, reference_rows, rules};
use crate::config::Config;
use crate::exit::Classify;

pub fn run(config: &Config, out: Option<PathBuf>, hybrid: Option<usize>) -> Result<ExitCode> {
    let rows = reference_rows(config)?;
    let detector = detector(config, &rows)?;
    let tables = GeneratorTables::bundled();
    let d = &config.dataset;
    if let Some(n) = hybrid {
        let out = out.unwrap_or_else(|| config.output.names.clone());
        let names = hybrid_fixture(&detector, d.brand_limit, n, &tables, config.seed);
        let mut w = create(&out)?;
        for (name, _) in &names {
            writeln!(w, "{name}")?;
        }
        w.flush()?;
        println!("hybrid names {} -> {}", names.len(), out.display());
        return Ok(ExitCode::SUCCESS);
    }
    let out = out.unwrap_or_else(|| config.output.dataset.clone());
    let spec = DatasetSpec { brand_limit: d.brand_limit, quotas: d.quotas, benign: d.benign, seed: config.seed };
    let data = build_ground_truth(&detector, &spec, &tables, rules()).input()?;
    data.write_jsonl(create(&out)?)?;
    for (kind, n) in data.counts() {
        println!("{kind:<8} {n:>6}");
    }
    println!("entries {} -> {}", data.len(), out.display());
    Ok(ExitCode::SUCCESS)
}
