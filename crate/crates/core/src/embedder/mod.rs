//! Embedding backends, cosine similarity, and the caching front end that the
//! pruner talks to.

mod cache;
mod offline;
mod remote;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, CacheEntry, EmbeddingCache};
pub use offline::{hash_token, normalized_tokens, offline_backend_id, offline_embed, OfflineBackend};
pub use remote::{RemoteBackend, RemoteEmbeddingConfig, EMBED_API_KEY_VAR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedding service unavailable after {attempts} attempts: {detail}")]
    RemoteUnavailable { attempts: u32, detail: String },
    #[error("text of {chars} chars exceeds backend limit of {limit}")]
    InputTooLong { chars: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding service error: {0}")]
    Remote(String),
    #[error("embedding cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub backend_id: String,
    /// Set when the vector has zero norm.
    #[serde(default)]
    pub degenerate: bool,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, backend_id: impl Into<String>) -> Self {
        let degenerate = values.iter().all(|v| *v == 0.0);
        Self { values, backend_id: backend_id.into(), degenerate }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity in `[-1, 1]`; zero when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    cosine_slices(&a.values, &b.values)
}

pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// A source of embeddings. Implementations return one vector per input, in
/// input order.
pub trait EmbeddingBackend: Send + Sync {
    fn id(&self) -> &str;
    fn max_input_chars(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderOptions {
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for EmbedderOptions {
    fn default() -> Self {
        Self { batch_size: 64, max_in_flight: 4 }
    }
}

type BatchResult = Result<Vec<Vec<f64>>, EmbedError>;

/// Front end over a backend: consults the cache, batches misses, bounds the
/// number of concurrent backend calls, and validates dimensions.
pub struct Embedder {
    backend: Arc<dyn EmbeddingBackend>,
    cache: Option<Arc<EmbeddingCache>>,
    opts: EmbedderOptions,
    dim: OnceLock<usize>,
    backend_texts: AtomicUsize,
}

impl Embedder {
    pub fn new(backend: Arc<dyn EmbeddingBackend>) -> Self {
        Self {
            backend,
            cache: None,
            opts: EmbedderOptions::default(),
            dim: OnceLock::new(),
            backend_texts: AtomicUsize::new(0),
        }
    }

    pub fn offline(dim: usize, seed: u64) -> Self {
        let e = Self::new(Arc::new(OfflineBackend::new(dim, seed)));
        let _ = e.dim.set(dim);
        e
    }

    pub fn with_cache(mut self, cache: Arc<EmbeddingCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_options(mut self, opts: EmbedderOptions) -> Self {
        assert!(opts.batch_size >= 1 && opts.max_in_flight >= 1);
        self.opts = opts;
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Number of texts sent to the backend so far (cache misses).
    pub fn backend_texts(&self) -> usize {
        self.backend_texts.load(Ordering::Relaxed)
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_texts(&[text.to_string()])?.remove(0))
    }

    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let limit = self.backend.max_input_chars();
        for t in texts {
            let chars = t.chars().count();
            if chars > limit {
                return Err(EmbedError::InputTooLong { chars, limit });
            }
        }
        let id = self.backend.id().to_string();
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        let mut misses: Vec<usize> = Vec::new();
        for (i, t) in texts.iter().enumerate() {
            if t.trim().is_empty() {
                if let Some(&d) = self.dim.get() {
                    out[i] = Some(vec![0.0; d]);
                    continue;
                }
            }
            match self.cache.as_ref().and_then(|c| c.get(&id, t)) {
                Some(v) => out[i] = Some(v),
                None => misses.push(i),
            }
        }
        // identical texts within one request are fetched once
        let mut unique: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashMap::new();
        for &i in &misses {
            seen.entry(texts[i].as_str()).or_insert_with(|| {
                unique.push(i);
                i
            });
        }
        if !unique.is_empty() {
            let fetched = self.fetch(texts, &unique)?;
            if let Some(cache) = &self.cache {
                let items: Vec<(&str, &[f64])> =
                    unique.iter().zip(&fetched).map(|(&i, v)| (texts[i].as_str(), v.as_slice())).collect();
                cache.put_many(&id, &items)?;
            }
            let by_text: std::collections::HashMap<&str, &Vec<f64>> =
                unique.iter().map(|&i| texts[i].as_str()).zip(&fetched).collect();
            for &i in &misses {
                out[i] = Some(by_text[texts[i].as_str()].clone());
            }
        }
        let dim = self.dim.get().copied();
        out.into_iter()
            .map(|v| {
                let v = v.expect("every slot filled");
                if let Some(d) = dim {
                    if v.len() != d {
                        return Err(EmbedError::DimensionMismatch { expected: d, got: v.len() });
                    }
                }
                Ok(EmbeddingVector::new(v, id.clone()))
            })
            .collect()
    }

    fn fetch(&self, texts: &[String], idx: &[usize]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let batches: Vec<Vec<String>> =
            idx.chunks(self.opts.batch_size).map(|c| c.iter().map(|&i| texts[i].clone()).collect()).collect();
        let results: Vec<Mutex<Option<BatchResult>>> = batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.opts.max_in_flight.min(batches.len());
        let run = || loop {
            let b = next.fetch_add(1, Ordering::SeqCst);
            let Some(batch) = batches.get(b) else { break };
            let r = self.backend.embed_batch(batch).and_then(|vs| {
                if vs.len() != batch.len() {
                    return Err(EmbedError::Remote(format!(
                        "backend returned {} vectors for {} texts",
                        vs.len(),
                        batch.len()
                    )));
                }
                Ok(vs)
            });
            *results[b].lock() = Some(r);
        };
        if workers <= 1 {
            run();
        } else {
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(run);
                }
            });
        }
        let mut out = Vec::with_capacity(idx.len());
        for r in results {
            let vs = r.into_inner().expect("batch processed")?;
            for v in vs {
                self.check_vector(&v)?;
                out.push(v);
            }
        }
        self.backend_texts.fetch_add(idx.len(), Ordering::Relaxed);
        Ok(out)
    }

    fn check_vector(&self, v: &[f64]) -> Result<(), EmbedError> {
        if v.is_empty() {
            return Err(EmbedError::DimensionMismatch { expected: self.dim.get().copied().unwrap_or(0), got: 0 });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::Remote("non-finite embedding value".into()));
        }
        let expected = *self.dim.get_or_init(|| v.len());
        if v.len() != expected {
            return Err(EmbedError::DimensionMismatch { expected, got: v.len() });
        }
        Ok(())
    }
}
