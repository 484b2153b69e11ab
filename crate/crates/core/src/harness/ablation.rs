//! Chunk-size and sentence-retrieval sweeps.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RetrievalMode};
use super::dataset::{load_dataset, DatasetRecord, LoadLimits};
use super::pipeline::{run_pipeline, RunReport};
use super::HarnessError;
use crate::embedder::normalized_tokens;
use crate::metrics::MetricReport;
use crate::segmenter::{chunk_document, split_sentences, SegmentationConfig, SentenceRule};

/// A sentence bears the aspect when it contains any of the aspect's words
/// (case-insensitive, edge punctuation ignored).
pub fn aspect_bearing(sentence: &str, aspect: &str) -> bool {
    let wanted: HashSet<String> = normalized_tokens(aspect).collect();
    !wanted.is_empty() && normalized_tokens(sentence).any(|t| wanted.contains(&t))
}

/// Fraction of aspect-bearing sentences that share a chunk with at least one
/// other aspect-bearing sentence, pooled over all records. Zero when no
/// record has an aspect-bearing sentence.
pub fn aspect_colocation(records: &[DatasetRecord], chunk_words: usize, rule: &SentenceRule) -> f64 {
    let seg = SegmentationConfig { target_words: chunk_words, sentence_rule: rule.clone() };
    let (mut bearing, mut colocated) = (0usize, 0usize);
    for rec in records {
        let sentences = split_sentences(&rec.document, rule);
        for chunk in chunk_document(&sentences, &seg) {
            let n = chunk.sentences.iter().filter(|s| aspect_bearing(&s.text, &rec.aspect)).count();
            bearing += n;
            if n >= 2 {
                colocated += n;
            }
        }
    }
    if bearing == 0 {
        0.0
    } else {
        colocated as f64 / bearing as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub chunk_words: usize,
    pub retrieval: RetrievalMode,
    pub evaluated: usize,
    pub failed: usize,
    pub means: Option<MetricReport>,
    pub aspect_colocation: f64,
    /// Mean over records of kept / total aspect-bearing sentences.
    pub aspect_retention: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub kind: String,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,chunk_words,retrieval,meteor,rouge1_f,rouge2_f,rougeL_f,aspect_colocation\n");
        for r in &self.rows {
            let m = |f: fn(&MetricReport) -> f64| r.means.as_ref().map(|x| format!("{:.6}", f(x))).unwrap_or_default();
            let retrieval = match r.retrieval {
                RetrievalMode::Chunk => "chunk",
                RetrievalMode::Sentence => "sentence",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6}",
                r.label,
                r.chunk_words,
                retrieval,
                m(|x| x.meteor),
                m(|x| x.rouge1.f1),
                m(|x| x.rouge2.f1),
                m(|x| x.rouge_l.f1),
                r.aspect_colocation
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(dir.join(format!("{}.json", self.kind)), json + "\n").map_err(io)?;
        std::fs::write(dir.join(format!("{}.csv", self.kind)), self.to_csv()).map_err(io)
    }
}

fn retention(report: &RunReport) -> Option<f64> {
    let fractions: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.prompt.aspect_sentences_total > 0)
        .map(|r| r.prompt.aspect_sentences_kept as f64 / r.prompt.aspect_sentences_total as f64)
        .collect();
    (!fractions.is_empty()).then(|| fractions.iter().sum::<f64>() / fractions.len() as f64)
}

fn load_records(cfg: &ExperimentConfig) -> Result<Vec<DatasetRecord>, HarnessError> {
    let limits = LoadLimits { max_records: cfg.max_records, max_record_words: cfg.max_record_words };
    Ok(load_dataset(&cfg.dataset.path, &cfg.dataset.adapter, limits)?.records)
}

fn run_variant(
    base: &ExperimentConfig,
    label: String,
    chunk_words: usize,
    retrieval: RetrievalMode,
    records: &[DatasetRecord],
    rule: &SentenceRule,
) -> Result<AblationRow, HarnessError> {
    let mut cfg = base.clone();
    cfg.prune.chunk_words = chunk_words;
    cfg.retrieval = retrieval;
    cfg.name = format!("{}-{label}", base.name);
    cfg.output_dir = base.output_dir.as_ref().map(|d| d.join(&label));
    let report = run_pipeline(&cfg)?;
    Ok(AblationRow {
        label,
        chunk_words,
        retrieval,
        evaluated: report.summary.evaluated,
        failed: report.summary.failed,
        means: report.summary.means,
        aspect_colocation: aspect_colocation(records, chunk_words, rule),
        aspect_retention: retention(&report),
    })
}

/// One full run per chunk size, otherwise identical.
pub fn run_ablation_chunk_size(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<AblationReport, HarnessError> {
    if sizes.len() < 2 {
        return Err(HarnessError::Config("chunk-size ablation needs at least two sizes".into()));
    }
    if sizes.contains(&0) {
        return Err(HarnessError::Config("chunk sizes must be positive".into()));
    }
    cfg.validate()?;
    let rule = cfg.segmentation.rule()?;
    let records = load_records(cfg)?;
    let rows = sizes
        .iter()
        .map(|&size| run_variant(cfg, format!("size-{size}"), size, RetrievalMode::Chunk, &records, &rule))
        .collect::<Result<Vec<_>, _>>()?;
    let report = AblationReport { kind: "chunk_size".into(), rows };
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

/// Chunked retrieval against a single sentence-level pool, in one report.
pub fn run_ablation_sentence_retrieval(cfg: &ExperimentConfig) -> Result<AblationReport, HarnessError> {
    cfg.validate()?;
    let rule = cfg.segmentation.rule()?;
    let records = load_records(cfg)?;
    let size = cfg.prune.chunk_words;
    let rows = vec![
        run_variant(cfg, "chunk".into(), size, RetrievalMode::Chunk, &records, &rule)?,
        run_variant(cfg, "sentence".into(), size, RetrievalMode::Sentence, &records, &rule)?,
    ];
    let report = AblationReport { kind: "sentence_retrieval".into(), rows };
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}
