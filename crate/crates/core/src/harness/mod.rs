//! Dataset ingestion, experiment orchestration, ablations and reports.

mod ablation;
mod config;
mod dataset;
mod pipeline;
pub mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

pub use ablation::{
    aspect_bearing, aspect_colocation, run_ablation_chunk_size, run_ablation_sentence_retrieval, AblationReport,
    AblationRow,
};
pub use config::{
    DatasetConfig, EmbeddingKind, EmbeddingSettings, ExperimentConfig, GeneratorKind, GeneratorSettings, IclPolicyKind,
    IclSettings, Method, PromptSettings, RetrievalMode, SegmentationSettings,
};
pub use dataset::{
    load_dataset, write_dataset, write_jsonl, DatasetRecord, LoadLimits, LoadStats, LoadedDataset, Split, ADAPTERS,
};
pub use pipeline::{
    evaluate_run, run_pipeline, run_pipeline_on, CorpusEval, Pipeline, PromptLog, PromptRecord, RecordRow, RunReport,
    RunSummary, Timing,
};

use crate::embedder::EmbedError;
use crate::promptgen::{GenError, PromptError};
use crate::pruner::PruneError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("unknown dataset adapter {0:?}")]
    AdapterUnknown(String),
    #[error("no records left after filtering")]
    EmptyAfterFilter,
    #[error("candidate and reference counts differ ({candidates} vs {references})")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("{failed} of {total} records failed, over the failure budget")]
    FailureBudgetExceeded { failed: usize, total: usize, report: Box<RunReport> },
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generate(#[from] GenError),
}

impl HarnessError {
    /// Process exit code: 1 config, 2 remote failure, 3 failure budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::FailureBudgetExceeded { .. } => 3,
            HarnessError::Embed(EmbedError::RemoteUnavailable { .. } | EmbedError::Remote(_))
            | HarnessError::Prune(PruneError::Embed(EmbedError::RemoteUnavailable { .. } | EmbedError::Remote(_)))
            | HarnessError::Generate(_) => 2,
            _ => 1,
        }
    }
}
