use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{Condvar, Mutex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ablation::aspect_bearing;
use super::config::{ExperimentConfig, IclPolicyKind, Method, RetrievalMode};
use super::dataset::{load_dataset, write_jsonl, DatasetRecord, LoadLimits, LoadStats, Split};
use super::HarnessError;
use crate::embedder::Embedder;
use crate::metrics::{evaluate_pair, MetricConfig, MetricReport};
use crate::promptgen::{select_icl_example, GenError, Generator, IclExample, IclPolicy, PromptBuilder, PromptSpec};
use crate::pruner::{prune_document, prune_sentence_level, recursive_prune, AspectQuery, PruneError, PrunedDocument};
use crate::segmenter::{chunk_document, count_words, split_sentences, SegmentationConfig, SentenceRule};

/// Counting semaphore bounding in-flight generation requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock();
            while *free == 0 {
                self.cv.wait(&mut free);
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock() += 1;
        self.cv.notify_one();
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptLog {
    pub template_version: String,
    pub prompt_tokens_est: usize,
    /// Document was cut at the tail to fit the token budget.
    pub truncated: bool,
    pub source_words: usize,
    /// Words handed to the prompt builder (after pruning, before truncation).
    pub input_words: usize,
    pub prompt_document_words: usize,
    pub bypassed: Option<bool>,
    pub budget_unreachable: bool,
    /// `doc_index` of every sentence kept by pruning.
    pub kept_sentences: Option<Vec<usize>>,
    pub aspect_sentences_total: usize,
    pub aspect_sentences_kept: usize,
    pub example_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub id: String,
    pub aspect: String,
    pub method: Method,
    pub ok: bool,
    pub error: Option<String>,
    pub summary: Option<String>,
    pub metrics: Option<MetricReport>,
    pub prompt: PromptLog,
    pub attempts: u32,
    pub latency_ms: u64,
}

/// Full prompt text, written to `prompts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_at: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub method: Method,
    pub retrieval: RetrievalMode,
    pub config: ExperimentConfig,
    pub load: LoadStats,
    pub evaluated: usize,
    pub failed: usize,
    pub failed_ids: Vec<String>,
    pub means: Option<MetricReport>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: RunSummary,
    pub rows: Vec<RecordRow>,
    pub prompts: Vec<PromptRecord>,
}

impl RunReport {
    /// Writes `summary.json`, `records.jsonl` and `prompts.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
        let summary = serde_json::to_string_pretty(&self.summary).map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), summary + "\n").map_err(|e| HarnessError::Io(e.to_string()))?;
        write_jsonl(&dir.join("records.jsonl"), &self.rows)?;
        write_jsonl(&dir.join("prompts.jsonl"), &self.prompts)
    }

    /// Mean of the per-record metrics of successful rows.
    pub fn recompute_means(&self) -> Option<MetricReport> {
        let ms: Vec<MetricReport> = self.rows.iter().filter_map(|r| r.metrics).collect();
        MetricReport::mean(&ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEval {
    pub per_record: Vec<MetricReport>,
    pub mean: MetricReport,
}

pub fn evaluate_run(
    generations: &[String],
    references: &[String],
    cfg: &MetricConfig,
) -> Result<CorpusEval, HarnessError> {
    if generations.len() != references.len() {
        return Err(HarnessError::LengthMismatch { candidates: generations.len(), references: references.len() });
    }
    if generations.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let per_record: Vec<MetricReport> =
        generations.par_iter().zip(references).map(|(g, r)| evaluate_pair(g, r, cfg)).collect();
    let mean = MetricReport::mean(&per_record).expect("non-empty");
    Ok(CorpusEval { per_record, mean })
}

/// Everything needed to process records for one experiment configuration.
pub struct Pipeline {
    cfg: ExperimentConfig,
    rule: SentenceRule,
    embedder: Embedder,
    builder: PromptBuilder,
    generator: Arc<dyn Generator>,
    train: Vec<IclExample>,
    slots: Slots,
}

struct Prepared {
    text: String,
    log: PromptLog,
}

impl Pipeline {
    pub fn new(
        cfg: ExperimentConfig,
        generator: Arc<dyn Generator>,
        train: Vec<IclExample>,
    ) -> Result<Self, HarnessError> {
        cfg.validate_settings()?;
        let rule = cfg.segmentation.rule()?;
        let embedder = cfg.embedding.build()?;
        let builder = cfg.prompt.builder()?;
        if cfg.method.uses_example() && train.is_empty() {
            return Err(HarnessError::Config(format!(
                "method {} needs training records for the in-context example",
                cfg.method.name()
            )));
        }
        let slots = Slots::new(cfg.generator.max_in_flight.max(1));
        Ok(Self { cfg, rule, embedder, builder, generator, train, slots })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn embedder(&self) -> &Embedder {
        &self.embedder
    }

    fn example_for(&self, aspect: &str) -> Result<Option<IclExample>, HarnessError> {
        if !self.cfg.method.uses_example() {
            return Ok(None);
        }
        let policy = match self.cfg.icl.policy {
            IclPolicyKind::Shortest => IclPolicy::Shortest,
            IclPolicyKind::AspectMatched => IclPolicy::AspectMatched(aspect.to_string()),
        };
        Ok(Some(select_icl_example(&self.train, &policy, self.cfg.icl.pool_size)?))
    }

    fn prune(&self, rec: &DatasetRecord) -> Result<Prepared, HarnessError> {
        let sentences = split_sentences(&rec.document, &self.rule);
        let aspect_idx: Vec<usize> =
            sentences.iter().filter(|s| aspect_bearing(&s.text, &rec.aspect)).map(|s| s.doc_index).collect();
        let mut log = PromptLog {
            source_words: count_words(&rec.document),
            aspect_sentences_total: aspect_idx.len(),
            ..PromptLog::default()
        };
        if !self.cfg.method.uses_pruning() {
            log.input_words = log.source_words;
            log.aspect_sentences_kept = aspect_idx.len();
            return Ok(Prepared { text: rec.document.clone(), log });
        }
        let query = AspectQuery::with_template(&rec.aspect, &self.cfg.embedding.query_template, &self.embedder)?;
        let prune_cfg = &self.cfg.prune;
        let pruned: PrunedDocument = match (self.cfg.retrieval, prune_cfg.global_target_words) {
            (RetrievalMode::Sentence, _) => prune_sentence_level(&sentences, &query, prune_cfg, &self.embedder)?,
            (RetrievalMode::Chunk, Some(_)) => match recursive_prune(&sentences, &query, prune_cfg, &self.embedder) {
                Ok(out) => out.document,
                Err(PruneError::BudgetUnreachable { best, .. }) => {
                    log.budget_unreachable = true;
                    *best
                }
                Err(e) => return Err(e.into()),
            },
            (RetrievalMode::Chunk, None) => {
                let seg = SegmentationConfig { target_words: prune_cfg.chunk_words, sentence_rule: self.rule.clone() };
                let chunks = chunk_document(&sentences, &seg);
                prune_document(&sentences, &chunks, &query, prune_cfg, &self.embedder)?
            }
        };
        let kept: Vec<usize> = pruned.sentences.iter().map(|s| s.doc_index).collect();
        log.aspect_sentences_kept = aspect_idx.iter().filter(|i| kept.binary_search(i).is_ok()).count();
        log.bypassed = Some(pruned.bypassed);
        log.input_words = pruned.total_words;
        log.kept_sentences = Some(kept);
        let text = if pruned.bypassed { rec.document.clone() } else { pruned.text() };
        Ok(Prepared { text, log })
    }

    /// Builds the prompt for one record without calling the generator.
    pub fn prepare(&self, rec: &DatasetRecord) -> Result<(PromptSpec, PromptLog), HarnessError> {
        let Prepared { text, mut log } = self.prune(rec)?;
        let example = self.example_for(&rec.aspect)?;
        let spec = self.builder.build(example.as_ref(), &text, &rec.aspect)?;
        log.template_version = spec.template_version.clone();
        log.prompt_tokens_est = spec.prompt_tokens_est;
        log.truncated = spec.truncated;
        log.prompt_document_words = count_words(&spec.document_text);
        log.example_id = example.map(|e| e.source_id);
        Ok((spec, log))
    }

    pub fn process(&self, rec: &DatasetRecord) -> (RecordRow, Option<PromptRecord>) {
        let mut row = RecordRow {
            id: rec.id.clone(),
            aspect: rec.aspect.clone(),
            method: self.cfg.method,
            ok: false,
            error: None,
            summary: None,
            metrics: None,
            prompt: PromptLog::default(),
            attempts: 0,
            latency_ms: 0,
        };
        let (spec, log) = match self.prepare(rec) {
            Ok(v) => v,
            Err(e) => {
                row.error = Some(e.to_string());
                return (row, None);
            }
        };
        row.prompt = log;
        let prompt =
            PromptRecord { id: rec.id.clone(), system: spec.system_message.clone(), user: spec.user_message.clone() };
        match self.slots.run(|| self.generator.generate(&spec)) {
            Ok(gen) => {
                row.metrics = Some(evaluate_pair(&gen.summary, &rec.reference_summary, &self.cfg.metrics));
                row.summary = Some(gen.summary);
                row.attempts = gen.attempts;
                row.latency_ms = gen.latency_ms;
                row.ok = true;
            }
            Err(e) => {
                if let GenError::RemoteUnavailable { attempts, .. } = &e {
                    row.attempts = *attempts;
                }
                row.error = Some(e.to_string());
            }
        }
        (row, Some(prompt))
    }

    /// Processes records on a worker pool; output rows are sorted by id.
    pub fn run_records(&self, records: &[DatasetRecord], load: LoadStats) -> Result<RunReport, HarnessError> {
        let started_at = chrono::Utc::now().to_rfc3339();
        let clock = Instant::now();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut results: Vec<(RecordRow, Option<PromptRecord>)> =
            pool.install(|| records.par_iter().map(|r| self.process(r)).collect());
        results.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        let (rows, prompts): (Vec<RecordRow>, Vec<Option<PromptRecord>>) = results.into_iter().unzip();
        let prompts: Vec<PromptRecord> = prompts.into_iter().flatten().collect();
        let failed_ids: Vec<String> = rows.iter().filter(|r| !r.ok).map(|r| r.id.clone()).collect();
        let metrics: Vec<MetricReport> = rows.iter().filter_map(|r| r.metrics).collect();
        let mut snapshot = self.cfg.clone();
        snapshot.output_dir = None;
        let summary = RunSummary {
            name: self.cfg.name.clone(),
            method: self.cfg.method,
            retrieval: self.cfg.retrieval,
            config: snapshot,
            load,
            evaluated: metrics.len(),
            failed: failed_ids.len(),
            failed_ids,
            means: MetricReport::mean(&metrics),
            timing: Timing { started_at, elapsed_ms: clock.elapsed().as_millis() as u64 },
        };
        let report = RunReport { summary, rows, prompts };
        if let Some(dir) = &self.cfg.output_dir {
            report.write(dir)?;
        }
        let total = report.rows.len();
        let failed = report.summary.failed;
        if total > 0 && failed as f64 > self.cfg.failure_budget * total as f64 {
            return Err(HarnessError::FailureBudgetExceeded { failed, total, report: Box::new(report) });
        }
        Ok(report)
    }
}

fn training_examples(cfg: &ExperimentConfig, eval_records: &[DatasetRecord]) -> Result<Vec<IclExample>, HarnessError> {
    let to_example = |r: &DatasetRecord| IclExample::new(&r.id, &r.document, &r.aspect, &r.reference_summary);
    match &cfg.icl.train_path {
        Some(path) => {
            let adapter = cfg.icl.train_adapter.as_deref().unwrap_or(&cfg.dataset.adapter);
            let train = load_dataset(path, adapter, LoadLimits::NONE)?;
            Ok(train.records.iter().map(to_example).collect())
        }
        None => Ok(eval_records.iter().filter(|r| r.split == Split::Train).map(to_example).collect()),
    }
}

/// Loads the configured dataset and runs the experiment.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let limits = LoadLimits { max_records: cfg.max_records, max_record_words: cfg.max_record_words };
    let data = load_dataset(&cfg.dataset.path, &cfg.dataset.adapter, limits)?;
    let train = if cfg.method.uses_example() { training_examples(cfg, &data.records)? } else { Vec::new() };
    let has_split = data.records.iter().any(|r| r.split == Split::Train);
    let eval: Vec<DatasetRecord> = if has_split && cfg.icl.train_path.is_none() {
        data.records.into_iter().filter(|r| r.split == Split::Test).collect()
    } else {
        data.records
    };
    if eval.is_empty() {
        return Err(HarnessError::EmptyAfterFilter);
    }
    let generator = cfg.generator.build()?;
    run_pipeline_on(cfg, generator, train, &eval, data.stats)
}

/// Runs on already-loaded records with an explicit generator.
pub fn run_pipeline_on(
    cfg: &ExperimentConfig,
    generator: Arc<dyn Generator>,
    train: Vec<IclExample>,
    records: &[DatasetRecord],
    load: LoadStats,
) -> Result<RunReport, HarnessError> {
    Pipeline::new(cfg.clone(), generator, train)?.run_records(records, load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::GeneratorKind;
    use crate::promptgen::LeadGenerator;

    fn rec(id: &str, doc: &str) -> DatasetRecord {
        DatasetRecord {
            id: id.into(),
            document: doc.into(),
            aspect: "health".into(),
            reference_summary: "Health care improved.".into(),
            split: Split::Test,
        }
    }

    #[test]
    fn evaluate_run_examples() {
        let cfg = MetricConfig::default();
        let e = evaluate_run(&["the cat sat".into()], &["the cat ran".into()], &cfg).unwrap();
        assert!((e.mean.rouge1.f1 - 2.0 / 3.0).abs() < 1e-12);
        let same = evaluate_run(&["a b c".into(), "d e".into()], &["a b c".into(), "d e".into()], &cfg).unwrap();
        assert_eq!(same.mean.rouge1.f1, 1.0);
        assert_eq!(same.mean.rouge_l.f1, 1.0);
        assert!(matches!(evaluate_run(&[], &[], &cfg), Err(HarnessError::EmptyInput)));
        assert!(matches!(evaluate_run(&["a".into()], &[], &cfg), Err(HarnessError::LengthMismatch { .. })));
    }

    #[test]
    fn original_method_uses_document_verbatim() {
        let doc = (0..200).map(|i| format!("word{i}")).collect::<Vec<_>>().join(" ");
        let mut cfg = ExperimentConfig { method: Method::Original, ..ExperimentConfig::default() };
        cfg.generator.backend = GeneratorKind::Lead;
        let p = Pipeline::new(cfg, Arc::new(LeadGenerator::default()), Vec::new()).unwrap();
        let (spec, log) = p.prepare(&rec("a", &doc)).unwrap();
        assert_eq!(spec.document_text, doc);
        assert!(!log.truncated);
    }

    #[test]
    fn slots_bound_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let slots = Slots::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    slots.run(|| {
                        let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(now, Ordering::SeqCst);
                        std::thread::sleep(std::time::Duration::from_millis(5));
                        live.fetch_sub(1, Ordering::SeqCst);
                    })
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
