use super::{EmbedError, EmbeddingBackend, EmbeddingVector};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded 64-bit hash: FNV-1a over the seed and the token bytes followed by
/// a splitmix64 finalizer. Platform independent.
pub fn hash_token(token: &str, seed: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Lowercased word tokens with leading and trailing punctuation removed.
pub fn normalized_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|w| {
        let t = w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
        (!t.is_empty()).then_some(t)
    })
}

/// Hashed bag-of-words embedding, L2-normalized. Each token adds ±1 to the
/// coordinate its hash selects. Text without tokens (or whose tokens cancel)
/// maps to the zero vector, flagged degenerate.
pub fn offline_embed(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    assert!(dim >= 8, "offline embedding dim must be at least 8");
    let mut values = vec![0.0f64; dim];
    for token in normalized_tokens(text) {
        let h = hash_token(&token, seed);
        let idx = (h % dim as u64) as usize;
        values[idx] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let degenerate = norm == 0.0;
    if !degenerate {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    EmbeddingVector { values, backend_id: offline_backend_id(dim, seed), degenerate }
}

pub fn offline_backend_id(dim: usize, seed: u64) -> String {
    format!("offline-hbow-d{dim}-s{seed}")
}

/// Deterministic in-process backend used for tests and network-free runs.
#[derive(Debug, Clone)]
pub struct OfflineBackend {
    dim: usize,
    seed: u64,
    id: String,
    max_input_chars: usize,
}

impl OfflineBackend {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 8, "offline embedding dim must be at least 8");
        Self { dim, seed, id: offline_backend_id(dim, seed), max_input_chars: usize::MAX }
    }

    pub fn with_max_input_chars(mut self, limit: usize) -> Self {
        self.max_input_chars = limit;
        self
    }
}

impl EmbeddingBackend for OfflineBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn max_input_chars(&self) -> usize {
        self.max_input_chars
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(texts.iter().map(|t| offline_embed(t, self.dim, self.seed).values).collect())
    }
}
