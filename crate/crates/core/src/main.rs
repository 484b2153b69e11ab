use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use aspectsum::harness::{
    evaluate_run, run_ablation_chunk_size, run_ablation_sentence_retrieval, run_pipeline, DatasetRecord, EmbeddingKind,
    ExperimentConfig, GeneratorKind, HarnessError, Method, Pipeline, RetrievalMode, Split,
};
use aspectsum::pruner::{prune_document, prune_sentence_level, recursive_prune, AspectQuery, PruneError};
use aspectsum::segmenter::{chunk_document, split_sentences, SegmentationConfig};

#[derive(Parser)]
#[command(name = "aspectsum", version, about = "Aspect-focused retrieve-and-prune summarization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prune one document to the sentences most relevant to an aspect.
    Prune {
        #[command(flatten)]
        opts: Overrides,
        #[command(flatten)]
        input: DocInput,
        /// Print the pruned document as JSON instead of plain text.
        #[arg(long)]
        json: bool,
    },
    /// Prune (per --method) and summarize one document.
    Summarize {
        #[command(flatten)]
        opts: Overrides,
        #[command(flatten)]
        input: DocInput,
    },
    /// Score candidate summaries against references, one per line.
    Evaluate {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an experiment over a dataset.
    Run {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Repeat the experiment for several chunk sizes.
    AblateChunkSize {
        #[command(flatten)]
        opts: Overrides,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        sizes: Vec<usize>,
    },
    /// Compare chunked retrieval with sentence-level retrieval.
    AblateSentence {
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Args)]
struct DocInput {
    /// Document file, or `-` for stdin.
    #[arg(long)]
    document: PathBuf,
    #[arg(long)]
    aspect: String,
}

/// Command-line values take precedence over the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, value_parser = parse_retrieval)]
    retrieval: Option<RetrievalMode>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    adapter: Option<String>,
    #[arg(long)]
    max_records: Option<usize>,
    #[arg(long)]
    max_record_words: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    chunk_words: Option<usize>,
    #[arg(long)]
    budget_w: Option<usize>,
    #[arg(long)]
    global_target: Option<usize>,
    #[arg(long)]
    bypass_threshold: Option<usize>,
    #[arg(long)]
    chunk_drop: Option<f64>,
    #[arg(long)]
    recursion_decay: Option<f64>,
    #[arg(long)]
    token_budget: Option<usize>,
    #[arg(long, value_parser = parse_generator)]
    generator: Option<GeneratorKind>,
    #[arg(long)]
    llm_url: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long, value_parser = parse_embed_backend)]
    embed_backend: Option<EmbeddingKind>,
    #[arg(long)]
    embed_url: Option<String>,
    #[arg(long)]
    embed_model: Option<String>,
    #[arg(long)]
    embed_cache: Option<PathBuf>,
}

fn parse_retrieval(s: &str) -> Result<RetrievalMode, String> {
    match s {
        "chunk" => Ok(RetrievalMode::Chunk),
        "sentence" => Ok(RetrievalMode::Sentence),
        _ => Err("expected chunk or sentence".into()),
    }
}

fn parse_generator(s: &str) -> Result<GeneratorKind, String> {
    match s {
        "chat" => Ok(GeneratorKind::Chat),
        "lead" => Ok(GeneratorKind::Lead),
        _ => Err("expected chat or lead".into()),
    }
}

fn parse_embed_backend(s: &str) -> Result<EmbeddingKind, String> {
    match s {
        "offline" => Ok(EmbeddingKind::Offline),
        "remote" => Ok(EmbeddingKind::Remote),
        _ => Err("expected offline or remote".into()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Overrides {
    fn config(self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        set(&mut cfg.method, self.method);
        set(&mut cfg.retrieval, self.retrieval);
        set(&mut cfg.dataset.path, self.dataset);
        set(&mut cfg.dataset.adapter, self.adapter);
        set(&mut cfg.max_records, self.max_records);
        set(&mut cfg.max_record_words, self.max_record_words);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.workers, self.workers);
        if self.output.is_some() {
            cfg.output_dir = self.output;
        }
        set(&mut cfg.prune.chunk_words, self.chunk_words);
        set(&mut cfg.prune.per_chunk_budget_w, self.budget_w);
        if self.global_target.is_some() {
            cfg.prune.global_target_words = self.global_target;
        }
        set(&mut cfg.prune.bypass_threshold_words, self.bypass_threshold);
        set(&mut cfg.prune.chunk_drop_fraction, self.chunk_drop);
        set(&mut cfg.prune.recursion_decay, self.recursion_decay);
        set(&mut cfg.prompt.token_budget, self.token_budget);
        set(&mut cfg.generator.backend, self.generator);
        set(&mut cfg.generator.endpoint.base_url, self.llm_url);
        set(&mut cfg.generator.endpoint.model, self.llm_model);
        set(&mut cfg.embedding.backend, self.embed_backend);
        set(&mut cfg.embedding.remote.base_url, self.embed_url);
        set(&mut cfg.embedding.remote.model, self.embed_model);
        if self.embed_cache.is_some() {
            cfg.embedding.cache_path = self.embed_cache;
        }
        Ok(cfg)
    }
}

fn read_input(path: &Path) -> Result<String, HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(io)?;
        Ok(s)
    } else if path.is_file() {
        std::fs::read_to_string(path).map_err(io)
    } else {
        Err(HarnessError::FileNotFound(path.to_path_buf()))
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Io(e.to_string()))?;
    emit(&format!("{text}\n"))
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), HarnessError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(HarnessError::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn prune_cmd(cfg: ExperimentConfig, input: DocInput, json: bool) -> Result<(), HarnessError> {
    cfg.validate_settings()?;
    let text = read_input(&input.document)?;
    let rule = cfg.segmentation.rule()?;
    let embedder = cfg.embedding.build()?;
    let query = AspectQuery::with_template(&input.aspect, &cfg.embedding.query_template, &embedder)?;
    let sentences = split_sentences(&text, &rule);
    let pruned = match (cfg.retrieval, cfg.prune.global_target_words) {
        (RetrievalMode::Sentence, _) => prune_sentence_level(&sentences, &query, &cfg.prune, &embedder)?,
        (RetrievalMode::Chunk, Some(_)) => match recursive_prune(&sentences, &query, &cfg.prune, &embedder) {
            Ok(out) => out.document,
            Err(PruneError::BudgetUnreachable { best, target, words, .. }) => {
                log::warn!("global target of {target} words not reached; best result has {words} words");
                *best
            }
            Err(e) => return Err(e.into()),
        },
        (RetrievalMode::Chunk, None) => {
            let seg = SegmentationConfig { target_words: cfg.prune.chunk_words, sentence_rule: rule };
            prune_document(&sentences, &chunk_document(&sentences, &seg), &query, &cfg.prune, &embedder)?
        }
    };
    if json {
        print_json(&pruned)
    } else {
        emit(&format!("{}\n", pruned.text()))?;
        Ok(())
    }
}

fn summarize_cmd(cfg: ExperimentConfig, input: DocInput) -> Result<(), HarnessError> {
    let document = read_input(&input.document)?;
    let train = if cfg.method.uses_example() {
        let path = cfg
            .icl
            .train_path
            .clone()
            .ok_or_else(|| HarnessError::Config("this method needs icl.train_path for its example".into()))?;
        let adapter = cfg.icl.train_adapter.clone().unwrap_or_else(|| cfg.dataset.adapter.clone());
        aspectsum::harness::load_dataset(&path, &adapter, aspectsum::harness::LoadLimits::NONE)?
            .records
            .iter()
            .map(|r| aspectsum::promptgen::IclExample::new(&r.id, &r.document, &r.aspect, &r.reference_summary))
            .collect()
    } else {
        Vec::new()
    };
    let generator = cfg.generator.build()?;
    let pipeline = Pipeline::new(cfg, Arc::clone(&generator), train)?;
    let record = DatasetRecord {
        id: "input".into(),
        document: document.trim().to_string(),
        aspect: input.aspect,
        reference_summary: String::new(),
        split: Split::Test,
    };
    let (spec, _) = pipeline.prepare(&record)?;
    let result = generator.generate(&spec)?;
    emit(&format!("{}\n", result.summary))?;
    Ok(())
}

fn evaluate_cmd(candidates: &Path, references: &Path, config: Option<PathBuf>) -> Result<(), HarnessError> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(&p)?,
        None => ExperimentConfig::default(),
    };
    let lines =
        |p: &Path| -> Result<Vec<String>, HarnessError> { Ok(read_input(p)?.lines().map(str::to_string).collect()) };
    let eval = evaluate_run(&lines(candidates)?, &lines(references)?, &cfg.metrics)?;
    print_json(&serde_json::json!({ "mean": eval.mean, "per_record": eval.per_record }))
}

fn dispatch(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Prune { opts, input, json } => prune_cmd(opts.config()?, input, json),
        Command::Summarize { opts, input } => summarize_cmd(opts.config()?, input),
        Command::Evaluate { candidates, references, config } => evaluate_cmd(&candidates, &references, config),
        Command::Run { opts } => {
            let report = run_pipeline(&opts.config()?)?;
            print_json(&report.summary)
        }
        Command::AblateChunkSize { opts, sizes } => {
            let report = run_ablation_chunk_size(&opts.config()?, &sizes)?;
            emit(&report.to_csv())
        }
        Command::AblateSentence { opts } => {
            let report = run_ablation_sentence_retrieval(&opts.config()?)?;
            emit(&report.to_csv())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let HarnessError::FailureBudgetExceeded { report, .. } = &e {
                for id in &report.summary.failed_ids {
                    eprintln!("  failed: {id}");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
