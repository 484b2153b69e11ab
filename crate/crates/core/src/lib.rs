//! Aspect-focused summarization: retrieve aspect-relevant sentences from long
//! documents with an embedding model, prune them under word budgets, assemble
//! prompts for a chat model, and score the results with ROUGE and METEOR.

pub mod embedder;
pub mod harness;
pub mod http;
pub mod metrics;
pub mod promptgen;
pub mod pruner;
pub mod retry;
pub mod segmenter;

pub use embedder::{cosine, offline_embed, Embedder, EmbeddingVector};
pub use pruner::{AspectQuery, PruneConfig, PrunedDocument};
pub use segmenter::{Chunk, SegmentationConfig, Sentence};
