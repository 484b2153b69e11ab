use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::embedder::{
    Embedder, EmbedderOptions, EmbeddingCache, OfflineBackend, RemoteBackend, RemoteEmbeddingConfig,
};
use crate::metrics::MetricConfig;
use crate::promptgen::{
    ChatClient, EndpointConfig, Generator, LeadGenerator, PromptBuilder, PromptTemplate, TokenEstimator,
    DEFAULT_ICL_POOL, DEFAULT_SYSTEM_INSTRUCTION, DEFAULT_TOKEN_BUDGET,
};
use crate::pruner::PruneConfig;
use crate::segmenter::{SentenceRule, DEFAULT_ABBREVIATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Original,
    Saresg,
    TruncatedIcl,
    SaresgIcl,
}

impl Method {
    pub fn uses_pruning(self) -> bool {
        matches!(self, Method::Saresg | Method::SaresgIcl)
    }

    pub fn uses_example(self) -> bool {
        matches!(self, Method::TruncatedIcl | Method::SaresgIcl)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Saresg => "saresg",
            Method::TruncatedIcl => "truncated_icl",
            Method::SaresgIcl => "saresg_icl",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "original" => Ok(Method::Original),
            "saresg" => Ok(Method::Saresg),
            "truncated_icl" => Ok(Method::TruncatedIcl),
            "saresg_icl" => Ok(Method::SaresgIcl),
            _ => Err(format!("unknown method {s:?} (original, saresg, truncated_icl, saresg_icl)")),
        }
    }
}

/// Chunked retrieval (per-chunk Top-W) or a single sentence-level pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    #[default]
    Chunk,
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub adapter: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { path: PathBuf::new(), adapter: "jsonl".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationSettings {
    pub sentence_rule: String,
    pub abbreviations: Vec<String>,
}

impl Default for SegmentationSettings {
    fn default() -> Self {
        Self {
            sentence_rule: "punct".into(),
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SegmentationSettings {
    pub fn rule(&self) -> Result<SentenceRule, HarnessError> {
        match self.sentence_rule.as_str() {
            "punct" => Ok(SentenceRule::Punct { abbreviations: self.abbreviations.clone() }),
            "lines" => Ok(SentenceRule::Lines),
            other => Err(HarnessError::Config(format!("unknown sentence_rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Offline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSettings {
    pub backend: EmbeddingKind,
    pub dim: usize,
    /// Hash seed of the offline backend.
    pub seed: u64,
    /// Persistent cache file; in-memory cache when absent.
    pub cache_path: Option<PathBuf>,
    pub cache: bool,
    pub batch_size: usize,
    pub max_in_flight: usize,
    /// Text embedded for the aspect; `{aspect}` is replaced.
    pub query_template: String,
    pub remote: RemoteEmbeddingConfig,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            backend: EmbeddingKind::Offline,
            dim: 256,
            seed: 0,
            cache_path: None,
            cache: true,
            batch_size: 64,
            max_in_flight: 4,
            query_template: "{aspect}".into(),
            remote: RemoteEmbeddingConfig::default(),
        }
    }
}

impl EmbeddingSettings {
    pub fn build(&self) -> Result<Embedder, HarnessError> {
        if self.batch_size == 0 || self.max_in_flight == 0 {
            return Err(HarnessError::Config("embedding batch_size and max_in_flight must be positive".into()));
        }
        let embedder = match self.backend {
            EmbeddingKind::Offline => {
                if self.dim < 8 {
                    return Err(HarnessError::Config("offline embedding dim must be at least 8".into()));
                }
                Embedder::new(Arc::new(OfflineBackend::new(self.dim, self.seed)))
            }
            EmbeddingKind::Remote => Embedder::new(Arc::new(RemoteBackend::new(self.remote.clone()))),
        };
        let embedder =
            embedder.with_options(EmbedderOptions { batch_size: self.batch_size, max_in_flight: self.max_in_flight });
        if !self.cache {
            return Ok(embedder);
        }
        let cache = match &self.cache_path {
            Some(p) => EmbeddingCache::open(p)?,
            None => EmbeddingCache::in_memory(),
        };
        Ok(embedder.with_cache(Arc::new(cache)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSettings {
    pub template_path: Option<PathBuf>,
    pub system_instruction: String,
    pub token_budget: usize,
    pub estimator: TokenEstimator,
}

impl Default for PromptSettings {
    fn default() -> Self {
        Self {
            template_path: None,
            system_instruction: DEFAULT_SYSTEM_INSTRUCTION.into(),
            token_budget: DEFAULT_TOKEN_BUDGET,
            estimator: TokenEstimator::default(),
        }
    }
}

impl PromptSettings {
    pub fn builder(&self) -> Result<PromptBuilder, HarnessError> {
        let template = match &self.template_path {
            Some(p) => PromptTemplate::load(p)?,
            None => PromptTemplate::default(),
        };
        if self.token_budget == 0 {
            return Err(HarnessError::Config("token_budget must be positive".into()));
        }
        if let TokenEstimator::CharsPerToken { chars_per_token } = self.estimator {
            if chars_per_token.is_nan() || chars_per_token <= 0.0 {
                return Err(HarnessError::Config("chars_per_token must be positive".into()));
            }
        }
        Ok(PromptBuilder {
            template,
            system_instruction: self.system_instruction.clone(),
            token_budget: self.token_budget,
            estimator: self.estimator,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IclPolicyKind {
    Shortest,
    AspectMatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IclSettings {
    /// Training records; records with `split = "train"` in the dataset are
    /// used when absent.
    pub train_path: Option<PathBuf>,
    pub train_adapter: Option<String>,
    pub policy: IclPolicyKind,
    pub pool_size: usize,
}

impl Default for IclSettings {
    fn default() -> Self {
        Self { train_path: None, train_adapter: None, policy: IclPolicyKind::Shortest, pool_size: DEFAULT_ICL_POOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// OpenAI-compatible chat endpoint.
    Chat,
    /// Offline lead-N extractor.
    Lead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSettings {
    pub backend: GeneratorKind,
    pub lead_words: usize,
    pub max_in_flight: usize,
    pub endpoint: EndpointConfig,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        Self { backend: GeneratorKind::Chat, lead_words: 60, max_in_flight: 2, endpoint: EndpointConfig::default() }
    }
}

impl GeneratorSettings {
    pub fn build(&self) -> Result<Arc<dyn Generator>, HarnessError> {
        if self.max_in_flight == 0 {
            return Err(HarnessError::Config("generator max_in_flight must be positive".into()));
        }
        Ok(match self.backend {
            GeneratorKind::Chat => Arc::new(ChatClient::new(self.endpoint.clone())),
            GeneratorKind::Lead => Arc::new(LeadGenerator { words: self.lead_words.max(1) }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub method: Method,
    pub retrieval: RetrievalMode,
    pub seed: u64,
    pub workers: usize,
    pub max_records: usize,
    pub max_record_words: usize,
    /// Abort when more than this fraction of records fail.
    pub failure_budget: f64,
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub segmentation: SegmentationSettings,
    pub prune: PruneConfig,
    pub embedding: EmbeddingSettings,
    pub prompt: PromptSettings,
    pub icl: IclSettings,
    pub generator: GeneratorSettings,
    pub metrics: MetricConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            method: Method::Saresg,
            retrieval: RetrievalMode::Chunk,
            seed: 0,
            workers: 4,
            max_records: 2000,
            max_record_words: 1024,
            failure_budget: 0.5,
            output_dir: None,
            dataset: DatasetConfig::default(),
            segmentation: SegmentationSettings::default(),
            prune: PruneConfig::default(),
            embedding: EmbeddingSettings::default(),
            prompt: PromptSettings::default(),
            icl: IclSettings::default(),
            generator: GeneratorSettings::default(),
            metrics: MetricConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative paths in a config file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.dataset.path);
        if let Some(p) = cfg.output_dir.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.icl.train_path.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.prompt.template_path.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.embedding.cache_path.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    /// Full check, including that a dataset is configured.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.dataset.path.as_os_str().is_empty() {
            return Err(HarnessError::Config("dataset.path is required".into()));
        }
        self.validate_settings()
    }

    /// Checks everything except the dataset location.
    pub fn validate_settings(&self) -> Result<(), HarnessError> {
        self.prune.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.segmentation.rule()?;
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be positive".into()));
        }
        if self.max_records == 0 || self.max_record_words == 0 {
            return Err(HarnessError::Config("max_records and max_record_words must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return Err(HarnessError::Config("failure_budget must be in [0, 1]".into()));
        }
        if self.method.uses_example() && self.icl.pool_size == 0 {
            return Err(HarnessError::Config("icl.pool_size must be positive".into()));
        }
        Ok(())
    }
}
