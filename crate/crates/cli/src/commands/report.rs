use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use squatwatch::report::{read_verdicts, summarize, CostModel};

use super::{rank_map, reference_rows};
use crate::config::Config;
use crate::exit::Classify;

pub fn run(config: &Config, verdicts: &Path, input_tokens: Option<u64>, output_tokens: Option<u64>, json: bool) -> Result<ExitCode> {
    let file = File::open(verdicts).with_context(|| format!("opening verdicts {}", verdicts.display())).input()?;
    let records = read_verdicts(BufReader::new(file)).input()?;
    let ranks = rank_map(&reference_rows(config)?);
    let summary = summarize(&records, |t| ranks.get(t).copied());
    if json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print!("{}", summary.render_text());
    }
    if input_tokens.is_some() || output_tokens.is_some() {
        let (i, o) = (input_tokens.unwrap_or(0), output_tokens.unwrap_or(0));
        let configured = config.cost.model()?;
        let mut models = CostModel::presets();
        if !models.iter().any(|m| m.name == configured.name) {
            models.push(configured);
        }
        let width = models.iter().map(|m| m.name.len()).max().unwrap_or(0);
        println!("\ncost for {i} input and {o} output tokens");
        for m in &models {
            println!("{:<width$}  {:>12}", m.name, m.estimate(i, o).to_string());
        }
    }
    Ok(ExitCode::SUCCESS)
}
