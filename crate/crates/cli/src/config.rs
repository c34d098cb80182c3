use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use squatwatch::dnx::{RemoteEmbedderConfig, DEFAULT_DIMENSION};
use squatwatch::llm::{FaultProfile, HttpChatConfig};
use squatwatch::report::CostModel;
use squatwatch::squat::Quotas;

/// The whole pipeline configuration. Relative paths are resolved against
/// the directory of the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub feeds: FeedsConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Ranked list in `rank,domain` form.
    pub list: PathBuf,
    /// Rows of the list to index; all when absent.
    pub limit: Option<usize>,
    /// Top brands known to the rule-based detectors and the oracle.
    #[serde(default = "default_brand_limit")]
    pub brand_limit: usize,
    #[serde(default = "default_index")]
    pub index: PathBuf,
    /// Extra domains accepted as existing targets.
    pub allowlist: Option<PathBuf>,
}

fn default_brand_limit() -> usize {
    1000
}

fn default_index() -> PathBuf {
    "reference.sqix".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    Local {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Remote(RemoteEmbedderConfig),
}

fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Local { dimension: DEFAULT_DIMENSION }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedsConfig {
    pub ct: Vec<PathBuf>,
    pub pdns: Vec<PathBuf>,
    pub zone: Vec<ZoneFeed>,
    /// File remembering names seen in earlier runs.
    pub store: Option<PathBuf>,
    /// First-seen stamp for new names; the current time when absent.
    pub observed_at: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneFeed {
    pub path: PathBuf,
    pub origin: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub chunk_size: usize,
    pub max_attempts: u32,
    pub max_output_tokens: u32,
    pub temperature: f64,
    /// Brands eligible as control entries.
    pub must_pass_top: usize,
    /// Optional replacement for the bundled feedback texts.
    pub feedback: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chunk_size: 100,
            max_attempts: 3,
            max_output_tokens: 8192,
            temperature: 0.0,
            must_pass_top: 100,
            feedback: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Oracle {
        #[serde(default)]
        faults: FaultProfile,
        #[serde(default = "default_oracle_in_flight")]
        in_flight: usize,
    },
    Http(HttpChatConfig),
    Fixed {
        reply: String,
    },
}

fn default_oracle_in_flight() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Oracle { faults: FaultProfile::NONE, in_flight: default_oracle_in_flight() }
    }
}

impl BackendConfig {
    pub fn name(&self) -> String {
        match self {
            BackendConfig::Oracle { .. } => "oracle".into(),
            BackendConfig::Http(c) => c.model.clone(),
            BackendConfig::Fixed { .. } => "fixed".into(),
        }
    }

    pub fn in_flight(&self) -> usize {
        match self {
            BackendConfig::Oracle { in_flight, .. } => *in_flight,
            BackendConfig::Http(c) => c.in_flight,
            BackendConfig::Fixed { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    /// A preset name, or any label when both rates are given.
    pub model: String,
    pub input_per_million: Option<f64>,
    pub output_per_million: Option<f64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { model: "llama-3-70b".into(), input_per_million: None, output_per_million: None }
    }
}

impl CostConfig {
    pub fn model(&self) -> Result<CostModel> {
        match (self.input_per_million, self.output_per_million) {
            (Some(i), Some(o)) => CostModel::new(&self.model, i, o).map_err(anyhow::Error::msg),
            (None, None) => CostModel::preset(&self.model).with_context(|| format!("unknown cost model {:?}", self.model)),
            _ => bail!("cost: give both input_per_million and output_per_million, or neither"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub names: PathBuf,
    pub verdicts: PathBuf,
    pub baseline: PathBuf,
    pub summary: PathBuf,
    pub dataset: PathBuf,
    pub eval: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            names: "names.txt".into(),
            verdicts: "verdicts.jsonl".into(),
            baseline: "baseline.jsonl".into(),
            summary: "summary.json".into(),
            dataset: "dataset.jsonl".into(),
            eval: "eval.json".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub brand_limit: usize,
    pub benign: usize,
    pub quotas: Quotas,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { brand_limit: 50, benign: 1000, quotas: Quotas::STANDARD }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        config.resolve(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        rebase(base, &mut self.reference.list);
        rebase(base, &mut self.reference.index);
        if let Some(p) = self.reference.allowlist.as_mut() {
            rebase(base, p);
        }
        for p in self.feeds.ct.iter_mut().chain(self.feeds.pdns.iter_mut()) {
            rebase(base, p);
        }
        for z in &mut self.feeds.zone {
            rebase(base, &mut z.path);
        }
        if let Some(p) = self.feeds.store.as_mut() {
            rebase(base, p);
        }
        if let Some(p) = self.pipeline.feedback.as_mut() {
            rebase(base, p);
        }
        let o = &mut self.output;
        for p in [&mut o.names, &mut o.verdicts, &mut o.baseline, &mut o.summary, &mut o.dataset, &mut o.eval] {
            rebase(base, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pipeline.chunk_size == 0 {
            bail!("pipeline.chunk_size must be at least 1");
        }
        if self.pipeline.max_attempts == 0 {
            bail!("pipeline.max_attempts must be at least 1");
        }
        if self.reference.brand_limit == 0 {
            bail!("reference.brand_limit must be at least 1");
        }
        if self.backend.in_flight() == 0 {
            bail!("backend in_flight must be at least 1");
        }
        if let BackendConfig::Oracle { faults, .. } = &self.backend {
            faults.validate().map_err(anyhow::Error::msg)?;
        }
        self.cost.model()?;
        Ok(())
    }
}
