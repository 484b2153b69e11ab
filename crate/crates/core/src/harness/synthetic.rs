//! Synthetic corpora with planted aspect-bearing sentences, used for
//! retrieval studies where the relevant sentences are known.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetRecord, Split};

pub const ASPECTS: &[&str] = &["health", "economy", "sports", "climate", "education", "technology"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedOptions {
    pub planted_per_doc: usize,
    pub distractors_per_doc: usize,
    pub min_sentence_words: usize,
    pub max_sentence_words: usize,
    pub vocab_size: usize,
}

impl Default for PlantedOptions {
    fn default() -> Self {
        Self {
            planted_per_doc: 3,
            distractors_per_doc: 27,
            min_sentence_words: 10,
            max_sentence_words: 14,
            vocab_size: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDoc {
    pub record: DatasetRecord,
    /// Sentence indices (0-based, document order) of the planted sentences.
    pub planted: Vec<usize>,
}

/// Pronounceable filler words built from consonant-vowel syllables.
pub fn filler_vocab(size: usize, rng: &mut impl Rng) -> Vec<String> {
    const CONS: &[u8] = b"bdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let mut vocab = std::collections::BTreeSet::new();
    while vocab.len() < size {
        let syllables = rng.random_range(2..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(CONS[rng.random_range(0..CONS.len())] as char);
            w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        }
        if !ASPECTS.contains(&w.as_str()) {
            vocab.insert(w);
        }
    }
    let mut v: Vec<String> = vocab.into_iter().collect();
    v.shuffle(rng);
    v
}

fn sentence(words: Vec<String>) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        let upper = first.to_uppercase();
        s.replace_range(..1, &upper);
    }
    s.push('.');
    s
}

/// Documents of `planted + distractors` sentences. Each planted sentence
/// carries the document's aspect word once at a random position; the
/// reference summary is the planted sentences in order.
pub fn planted_corpus(n_docs: usize, seed: u64, opts: &PlantedOptions) -> Vec<PlantedDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = filler_vocab(opts.vocab_size, &mut rng);
    let n_sent = opts.planted_per_doc + opts.distractors_per_doc;
    (0..n_docs)
        .map(|d| {
            let aspect = ASPECTS[d % ASPECTS.len()];
            let mut positions: Vec<usize> = (0..n_sent).collect();
            positions.shuffle(&mut rng);
            let mut planted: Vec<usize> = positions[..opts.planted_per_doc].to_vec();
            planted.sort_unstable();
            let sentences: Vec<String> = (0..n_sent)
                .map(|i| {
                    let len = rng.random_range(opts.min_sentence_words..=opts.max_sentence_words);
                    let mut words: Vec<String> =
                        (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].clone()).collect();
                    if planted.binary_search(&i).is_ok() {
                        let at = rng.random_range(0..len);
                        words[at] = aspect.to_string();
                    }
                    sentence(words)
                })
                .collect();
            let summary = planted.iter().map(|&i| sentences[i].as_str()).collect::<Vec<_>>().join(" ");
            PlantedDoc {
                record: DatasetRecord {
                    id: format!("planted-{d:04}"),
                    document: sentences.join(" "),
                    aspect: aspect.to_string(),
                    reference_summary: summary,
                    split: Split::Test,
                },
                planted,
            }
        })
        .collect()
}
