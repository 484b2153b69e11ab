//! Aspect-driven retrieval and pruning.
//!
//! Every sentence is scored by cosine similarity between its embedding and
//! the aspect embedding. Within each chunk the highest-scoring sentences are
//! taken until their cumulative word count reaches the per-chunk budget `W`;
//! survivors are put back in document order and concatenated across chunks.
//! Documents shorter than the bypass threshold are passed through untouched.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedder::{cosine, EmbedError, Embedder, EmbeddingVector};
use crate::segmenter::{chunk_document, join_sentences, Chunk, SegmentationConfig, Sentence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PruneError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("aspect must not be empty")]
    EmptyAspect,
    #[error("global target of {target} words unreachable: {words} words left after {rounds} rounds")]
    BudgetUnreachable {
        target: usize,
        words: usize,
        rounds: usize,
        /// Smallest document reached; callers may hard-truncate it.
        best: Box<PrunedDocument>,
        round_words: Vec<usize>,
    },
    #[error("invalid prune config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AspectQuery {
    pub aspect: String,
    pub embedding: EmbeddingVector,
}

impl AspectQuery {
    /// Embeds the bare aspect string.
    pub fn new(aspect: &str, embedder: &Embedder) -> Result<Self, PruneError> {
        Self::with_template(aspect, "{aspect}", embedder)
    }

    /// Embeds `template` with `{aspect}` replaced by the aspect.
    pub fn with_template(aspect: &str, template: &str, embedder: &Embedder) -> Result<Self, PruneError> {
        if aspect.trim().is_empty() {
            return Err(PruneError::EmptyAspect);
        }
        let embedding = embedder.embed_one(&template.replace("{aspect}", aspect))?;
        Ok(Self { aspect: aspect.to_string(), embedding })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub sentence: Sentence,
    pub chunk_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk: Chunk,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneConfig {
    /// Chunk size used when (re)segmenting.
    pub chunk_words: usize,
    pub per_chunk_budget_w: usize,
    pub global_target_words: Option<usize>,
    pub bypass_threshold_words: usize,
    pub chunk_drop_fraction: f64,
    pub recursion_decay: f64,
    pub max_recursion_rounds: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            chunk_words: crate::segmenter::DEFAULT_TARGET_WORDS,
            per_chunk_budget_w: 128,
            global_target_words: None,
            bypass_threshold_words: 1024,
            chunk_drop_fraction: 0.0,
            recursion_decay: 0.8,
            max_recursion_rounds: 8,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), PruneError> {
        let bad = |m: &str| Err(PruneError::InvalidConfig(m.to_string()));
        if self.chunk_words == 0 {
            return bad("chunk_words must be positive");
        }
        if self.per_chunk_budget_w == 0 {
            return bad("per_chunk_budget_w must be positive");
        }
        if self.global_target_words == Some(0) {
            return bad("global_target_words must be positive");
        }
        if self.bypass_threshold_words == 0 {
            return bad("bypass_threshold_words must be positive");
        }
        if !(0.0..1.0).contains(&self.chunk_drop_fraction) {
            return bad("chunk_drop_fraction must be in [0, 1)");
        }
        if !(self.recursion_decay > 0.0 && self.recursion_decay < 1.0) {
            return bad("recursion_decay must be in (0, 1)");
        }
        if self.max_recursion_rounds == 0 {
            return bad("max_recursion_rounds must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub chunk_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedDocument {
    pub sentences: Vec<Sentence>,
    pub total_words: usize,
    pub provenance: Vec<Provenance>,
    pub bypassed: bool,
}

impl PrunedDocument {
    fn passthrough(sentences: &[Sentence], bypassed: bool) -> Self {
        Self {
            sentences: sentences.to_vec(),
            total_words: sentences.iter().map(|s| s.word_count).sum(),
            provenance: Vec::new(),
            bypassed,
        }
    }

    fn from_selected(selected: Vec<ScoredSentence>) -> Self {
        let total_words = selected.iter().map(|s| s.sentence.word_count).sum();
        let provenance = selected.iter().map(|s| Provenance { chunk_index: s.chunk_index, score: s.score }).collect();
        let sentences = selected.into_iter().map(|s| s.sentence).collect();
        Self { sentences, total_words, provenance, bypassed: false }
    }

    pub fn text(&self) -> String {
        join_sentences(&self.sentences)
    }
}

pub fn score_chunks(
    chunks: &[Chunk],
    query: &AspectQuery,
    embedder: &Embedder,
) -> Result<Vec<ScoredChunk>, PruneError> {
    let texts: Vec<String> = chunks.iter().map(Chunk::text).collect();
    let vectors = embedder.embed_texts(&texts)?;
    chunks
        .iter()
        .zip(&vectors)
        .map(|(c, v)| Ok(ScoredChunk { chunk: c.clone(), score: cosine(v, &query.embedding)? }))
        .collect()
}

/// Drops the `floor(n * drop_fraction)` lowest-scoring chunks. Among equal
/// scores the later chunk is dropped first.
pub fn filter_chunks(scored: &[ScoredChunk], drop_fraction: f64) -> Vec<Chunk> {
    let drop = (scored.len() as f64 * drop_fraction).floor() as usize;
    let mut order: Vec<usize> = (0..scored.len()).collect();
    // ascending score; among ties the later chunk comes first
    order.sort_by(|&a, &b| scored[a].score.partial_cmp(&scored[b].score).unwrap_or(Ordering::Equal).then(b.cmp(&a)));
    let mut dropped = vec![false; scored.len()];
    for &i in order.iter().take(drop) {
        dropped[i] = true;
    }
    scored.iter().zip(dropped).filter(|(_, d)| !d).map(|(s, _)| s.chunk.clone()).collect()
}

pub fn score_sentences(
    chunk: &Chunk,
    query: &AspectQuery,
    embedder: &Embedder,
) -> Result<Vec<ScoredSentence>, PruneError> {
    let texts: Vec<String> = chunk.sentences.iter().map(|s| s.text.clone()).collect();
    let vectors = embedder.embed_texts(&texts)?;
    chunk
        .sentences
        .iter()
        .zip(&vectors)
        .map(|(s, v)| {
            Ok(ScoredSentence {
                sentence: s.clone(),
                chunk_index: chunk.chunk_index,
                score: cosine(v, &query.embedding)?,
            })
        })
        .collect()
}

/// Greedy Top-W: walk sentences by descending score (earlier position wins
/// ties), keep each one, and stop as soon as the kept words reach `w`. The
/// result is returned in document order.
pub fn select_top_w(scored: &[ScoredSentence], w: usize) -> Vec<ScoredSentence> {
    let mut order: Vec<&ScoredSentence> = scored.iter().collect();
    order.sort_by(|a, b| rank_order(a.score, a.sentence.doc_index, b.score, b.sentence.doc_index));
    let mut kept = Vec::new();
    let mut words = 0;
    for s in order {
        if words >= w {
            break;
        }
        words += s.sentence.word_count;
        kept.push(s.clone());
    }
    kept.sort_by_key(|s| s.sentence.doc_index);
    kept
}

fn rank_order(sa: f64, ia: usize, sb: f64, ib: usize) -> Ordering {
    sb.partial_cmp(&sa).unwrap_or(Ordering::Equal).then(ia.cmp(&ib))
}

/// Scores every sentence once; keyed by `doc_index`.
pub fn score_all(
    sentences: &[Sentence],
    query: &AspectQuery,
    embedder: &Embedder,
) -> Result<HashMap<usize, f64>, PruneError> {
    let texts: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();
    let vectors = embedder.embed_texts(&texts)?;
    sentences.iter().zip(&vectors).map(|(s, v)| Ok((s.doc_index, cosine(v, &query.embedding)?))).collect()
}

/// Per-chunk Top-W over precomputed sentence scores.
pub fn select_chunks(chunks: &[Chunk], scores: &HashMap<usize, f64>, w: usize) -> PrunedDocument {
    let mut selected = Vec::new();
    for chunk in chunks {
        let scored: Vec<ScoredSentence> = chunk
            .sentences
            .iter()
            .map(|s| ScoredSentence {
                sentence: s.clone(),
                chunk_index: chunk.chunk_index,
                score: scores.get(&s.doc_index).copied().unwrap_or(0.0),
            })
            .collect();
        selected.extend(select_top_w(&scored, w));
    }
    selected.sort_by_key(|s| s.sentence.doc_index);
    PrunedDocument::from_selected(selected)
}

fn total_words(sentences: &[Sentence]) -> usize {
    sentences.iter().map(|s| s.word_count).sum()
}

/// One retrieval pass without the bypass gate.
fn prune_pass(
    sentences: &[Sentence],
    query: &AspectQuery,
    cfg: &PruneConfig,
    w: usize,
    scores: &HashMap<usize, f64>,
    embedder: &Embedder,
) -> Result<PrunedDocument, PruneError> {
    let chunks = chunk_document(sentences, &SegmentationConfig::with_target(cfg.chunk_words));
    let chunks = if cfg.chunk_drop_fraction > 0.0 {
        filter_chunks(&score_chunks(&chunks, query, embedder)?, cfg.chunk_drop_fraction)
    } else {
        chunks
    };
    Ok(select_chunks(&chunks, scores, w))
}

/// Single-pass pruning of an already segmented document.
pub fn prune_document(
    sentences: &[Sentence],
    chunks: &[Chunk],
    query: &AspectQuery,
    cfg: &PruneConfig,
    embedder: &Embedder,
) -> Result<PrunedDocument, PruneError> {
    cfg.validate()?;
    if total_words(sentences) < cfg.bypass_threshold_words {
        return Ok(PrunedDocument::passthrough(sentences, true));
    }
    let scores = score_all(sentences, query, embedder)?;
    let chunks = if cfg.chunk_drop_fraction > 0.0 {
        filter_chunks(&score_chunks(chunks, query, embedder)?, cfg.chunk_drop_fraction)
    } else {
        chunks.to_vec()
    };
    Ok(select_chunks(&chunks, &scores, cfg.per_chunk_budget_w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveOutcome {
    pub document: PrunedDocument,
    /// Word count after each pruning round; empty when nothing was pruned.
    pub round_words: Vec<usize>,
}

/// Repeats pruning with a shrinking per-chunk budget until the document fits
/// `global_target_words`. Each round re-chunks the previous round's output.
/// The bypass gate only applies to the original document.
pub fn recursive_prune(
    sentences: &[Sentence],
    query: &AspectQuery,
    cfg: &PruneConfig,
    embedder: &Embedder,
) -> Result<RecursiveOutcome, PruneError> {
    cfg.validate()?;
    let target = cfg
        .global_target_words
        .ok_or_else(|| PruneError::InvalidConfig("recursive pruning needs global_target_words".into()))?;
    let original_words = total_words(sentences);
    if original_words < cfg.bypass_threshold_words {
        return Ok(RecursiveOutcome {
            document: PrunedDocument::passthrough(sentences, true),
            round_words: Vec::new(),
        });
    }
    if original_words <= target {
        return Ok(RecursiveOutcome {
            document: PrunedDocument::passthrough(sentences, false),
            round_words: Vec::new(),
        });
    }
    let scores = score_all(sentences, query, embedder)?;
    let mut w = cfg.per_chunk_budget_w;
    let mut current = sentences.to_vec();
    let mut round_words = Vec::new();
    let mut best: Option<PrunedDocument> = None;
    for round in 0..cfg.max_recursion_rounds {
        if round > 0 {
            w = ((w as f64 * cfg.recursion_decay).floor() as usize).max(1);
        }
        let doc = prune_pass(&current, query, cfg, w, &scores, embedder)?;
        round_words.push(doc.total_words);
        let stalled = w == 1 && doc.sentences.len() == current.len();
        current = doc.sentences.clone();
        if doc.total_words <= target {
            return Ok(RecursiveOutcome { document: doc, round_words });
        }
        best = Some(doc);
        if stalled {
            break;
        }
    }
    let best = best.expect("at least one round ran");
    Err(PruneError::BudgetUnreachable {
        target,
        words: best.total_words,
        rounds: round_words.len(),
        best: Box::new(best),
        round_words,
    })
}

/// Sentence-level retrieval: every sentence competes in a single pool with
/// budget `n_chunks * W`, where `n_chunks` is the chunk count chunked mode
/// would have produced.
pub fn prune_sentence_level(
    sentences: &[Sentence],
    query: &AspectQuery,
    cfg: &PruneConfig,
    embedder: &Embedder,
) -> Result<PrunedDocument, PruneError> {
    cfg.validate()?;
    if total_words(sentences) < cfg.bypass_threshold_words {
        return Ok(PrunedDocument::passthrough(sentences, true));
    }
    let n_chunks = chunk_document(sentences, &SegmentationConfig::with_target(cfg.chunk_words)).len();
    let scores = score_all(sentences, query, embedder)?;
    let scored: Vec<ScoredSentence> = sentences
        .iter()
        .map(|s| ScoredSentence { sentence: s.clone(), chunk_index: s.doc_index, score: scores[&s.doc_index] })
        .collect();
    Ok(PrunedDocument::from_selected(select_top_w(&scored, n_chunks * cfg.per_chunk_budget_w)))
}
