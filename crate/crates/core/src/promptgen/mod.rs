//! Prompt assembly under a token budget, one-shot example selection, and
//! summary generation.

mod generate;
mod template;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmenter::count_words;

pub use generate::{
    ChatClient, ChatMessage, EndpointConfig, GenError, GenerationResult, Generator, LeadGenerator, LLM_API_KEY_VAR,
};
pub use template::{PromptTemplate, DEFAULT_TEMPLATE, PLACEHOLDERS};

pub const DEFAULT_TOKEN_BUDGET: usize = 4096;
pub const DEFAULT_CHARS_PER_TOKEN: f64 = 4.0;
pub const DEFAULT_ICL_POOL: usize = 20;
pub const DEFAULT_SYSTEM_INSTRUCTION: &str =
    "You are an expert at writing aspect-based summaries. Summarize only what the document says about the requested aspect, faithfully and concisely.";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("token budget {budget} too small: {needed} tokens needed before any document text")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("aspect must not be empty")]
    EmptyAspect,
    #[error("no training records to draw an example from")]
    EmptyTrainingSet,
    #[error("template error: {0}")]
    Template(String),
}

/// How prompt length is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TokenEstimator {
    /// `ceil(chars / chars_per_token)`.
    CharsPerToken { chars_per_token: f64 },
    /// One token per whitespace-delimited word.
    WordProxy,
}

impl Default for TokenEstimator {
    fn default() -> Self {
        TokenEstimator::CharsPerToken { chars_per_token: DEFAULT_CHARS_PER_TOKEN }
    }
}

impl TokenEstimator {
    pub fn estimate(&self, text: &str) -> usize {
        match *self {
            TokenEstimator::CharsPerToken { chars_per_token } => estimate_tokens(text, chars_per_token),
            TokenEstimator::WordProxy => count_words(text),
        }
    }
}

pub fn estimate_tokens(text: &str, chars_per_token: f64) -> usize {
    assert!(chars_per_token > 0.0, "chars_per_token must be positive");
    (text.chars().count() as f64 / chars_per_token).ceil() as usize
}

/// Drops whole words from the end of `document` until its estimate plus
/// `fixed_overhead` fits `budget`. The result is a literal prefix of the
/// input ending at a word boundary.
pub fn truncate_to_budget(
    document: &str,
    budget: usize,
    fixed_overhead: usize,
    estimator: &TokenEstimator,
) -> Result<String, PromptError> {
    if fixed_overhead >= budget {
        return Err(PromptError::BudgetTooSmall { budget, needed: fixed_overhead + 1 });
    }
    let room = budget - fixed_overhead;
    if estimator.estimate(document) <= room {
        return Ok(document.to_string());
    }
    // byte offsets where each word ends
    let ends: Vec<usize> = crate::segmenter::tokenize_words(document).into_iter().map(|t| t.char_span.1).collect();
    // largest k such that the first k words fit; estimate is monotone in k
    let fits = |k: usize| k == 0 || estimator.estimate(&document[..ends[k - 1]]) <= room;
    let (mut lo, mut hi) = (0usize, ends.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if lo == 0 {
        return Err(PromptError::BudgetTooSmall {
            budget,
            needed: fixed_overhead + estimator.estimate(&document[..ends[0]]),
        });
    }
    Ok(document[..ends[lo - 1]].to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclExample {
    pub document: String,
    pub aspect: String,
    pub summary: String,
    pub source_id: String,
    pub word_count: usize,
}

impl IclExample {
    pub fn new(source_id: &str, document: &str, aspect: &str, summary: &str) -> Self {
        Self {
            document: document.to_string(),
            aspect: aspect.to_string(),
            summary: summary.to_string(),
            source_id: source_id.to_string(),
            word_count: count_words(document),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "aspect", rename_all = "snake_case")]
pub enum IclPolicy {
    Shortest,
    AspectMatched(String),
}

/// The `pool_size` shortest records by word count, ties by `source_id`.
pub fn icl_pool(records: &[IclExample], pool_size: usize) -> Vec<&IclExample> {
    let mut sorted: Vec<&IclExample> = records.iter().collect();
    sorted.sort_by(|a, b| a.word_count.cmp(&b.word_count).then_with(|| a.source_id.cmp(&b.source_id)));
    sorted.truncate(pool_size.max(1));
    sorted
}

/// Picks the one-shot example: the shortest record of the candidate pool.
/// With an aspect-matched policy the pool is drawn from records with the
/// same aspect, falling back to the whole set when none match.
pub fn select_icl_example(
    records: &[IclExample],
    policy: &IclPolicy,
    pool_size: usize,
) -> Result<IclExample, PromptError> {
    if records.is_empty() {
        return Err(PromptError::EmptyTrainingSet);
    }
    let matched: Vec<IclExample> = match policy {
        IclPolicy::Shortest => Vec::new(),
        IclPolicy::AspectMatched(aspect) => {
            records.iter().filter(|r| r.aspect.trim().eq_ignore_ascii_case(aspect.trim())).cloned().collect()
        }
    };
    let source = if matched.is_empty() { records } else { &matched };
    Ok(icl_pool(source, pool_size)[0].clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub system_instruction: String,
    pub icl_example: Option<IclExample>,
    /// Document text as it appears in the prompt (possibly truncated).
    pub document_text: String,
    pub aspect: String,
    pub token_budget: usize,
    pub system_message: String,
    pub user_message: String,
    pub prompt_tokens_est: usize,
    pub truncated: bool,
    pub template_version: String,
}

#[derive(Debug, Clone)]
pub struct PromptBuilder {
    pub template: PromptTemplate,
    pub system_instruction: String,
    pub token_budget: usize,
    pub estimator: TokenEstimator,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self {
            template: PromptTemplate::default(),
            system_instruction: DEFAULT_SYSTEM_INSTRUCTION.to_string(),
            token_budget: DEFAULT_TOKEN_BUDGET,
            estimator: TokenEstimator::default(),
        }
    }
}

impl PromptBuilder {
    fn render(&self, example: Option<&IclExample>, document: &str, aspect: &str) -> (String, String) {
        let mut values: HashMap<&str, &str> = HashMap::new();
        values.insert("system", &self.system_instruction);
        values.insert("document", document);
        values.insert("aspect", aspect);
        if let Some(ex) = example {
            values.insert("example_doc", &ex.document);
            values.insert("example_aspect", &ex.aspect);
            values.insert("example_summary", &ex.summary);
        }
        self.template.render(&values, example.is_some())
    }

    fn estimate(&self, system: &str, user: &str) -> usize {
        self.estimator.estimate(system) + self.estimator.estimate(user)
    }

    /// Assembles the prompt. Only the target document is ever truncated;
    /// the instruction and the example are kept verbatim.
    pub fn build(&self, example: Option<&IclExample>, document: &str, aspect: &str) -> Result<PromptSpec, PromptError> {
        if aspect.trim().is_empty() {
            return Err(PromptError::EmptyAspect);
        }
        let (sys0, user0) = self.render(example, "", aspect);
        let overhead = self.estimate(&sys0, &user0);
        let document_text = if document.trim().is_empty() {
            if overhead > self.token_budget {
                return Err(PromptError::BudgetTooSmall { budget: self.token_budget, needed: overhead });
            }
            document.to_string()
        } else {
            truncate_to_budget(document, self.token_budget, overhead, &self.estimator)?
        };
        let (system_message, user_message) = self.render(example, &document_text, aspect);
        let prompt_tokens_est = self.estimate(&system_message, &user_message);
        debug_assert!(prompt_tokens_est <= self.token_budget);
        Ok(PromptSpec {
            system_instruction: self.system_instruction.clone(),
            icl_example: example.cloned(),
            truncated: document_text.len() != document.len(),
            document_text,
            aspect: aspect.to_string(),
            token_budget: self.token_budget,
            system_message,
            user_message,
            prompt_tokens_est,
            template_version: self.template.version.clone(),
        })
    }
}
