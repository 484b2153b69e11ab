//! Word tokenization, rule-based sentence splitting and sentence-aligned
//! chunking.
//!
//! A word is a maximal run of non-whitespace characters. Sentences never
//! straddle chunks: a chunk is closed on the sentence that makes its word
//! count reach or cross the target.

use serde::{Deserialize, Serialize};

/// Default chunk size in words.
pub const DEFAULT_TARGET_WORDS: usize = 256;

/// Abbreviations that end in a period but do not end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "etc.", "e.g.", "i.e.", "inc.", "ltd.", "co.",
    "corp.", "no.", "fig.", "gen.", "gov.", "sen.", "rep.", "u.s.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.",
    "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordToken {
    pub text: String,
    /// Half-open byte range into the source text.
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub doc_index: usize,
    pub word_count: usize,
}

impl Sentence {
    pub fn new(text: impl Into<String>, doc_index: usize) -> Self {
        let text = text.into();
        let word_count = count_words(&text);
        Self { text, doc_index, word_count }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_index: usize,
    pub sentences: Vec<Sentence>,
    pub word_count: usize,
}

impl Chunk {
    /// Sentence texts joined by single spaces.
    pub fn text(&self) -> String {
        join_sentences(&self.sentences)
    }
}

/// Sentence boundary rule set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SentenceRule {
    /// Split after `.`, `?` or `!` (optionally followed by closing quotes or
    /// brackets) when the next word starts with an uppercase letter, or at
    /// end of input. Words in `abbreviations` never end a sentence.
    Punct { abbreviations: Vec<String> },
    /// Every non-blank line is one sentence.
    Lines,
}

impl Default for SentenceRule {
    fn default() -> Self {
        SentenceRule::Punct { abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect() }
    }
}

impl SentenceRule {
    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "punct" => Some(Self::default()),
            "lines" => Some(Self::Lines),
            _ => None,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            SentenceRule::Punct { .. } => "punct",
            SentenceRule::Lines => "lines",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub target_words: usize,
    pub sentence_rule: SentenceRule,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { target_words: DEFAULT_TARGET_WORDS, sentence_rule: SentenceRule::default() }
    }
}

impl SegmentationConfig {
    pub fn with_target(target_words: usize) -> Self {
        assert!(target_words >= 1, "target_words must be positive");
        Self { target_words, ..Self::default() }
    }
}

pub fn tokenize_words(text: &str) -> Vec<WordToken> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(WordToken { text: text[s..i].to_string(), char_span: (s, i) });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(WordToken { text: text[s..].to_string(), char_span: (s, text.len()) });
    }
    tokens
}

/// Word count without allocating tokens.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn split_sentences(text: &str, rule: &SentenceRule) -> Vec<Sentence> {
    let spans = match rule {
        SentenceRule::Lines => text
            .lines()
            .filter_map(|line| {
                let trimmed = line.trim();
                (!trimmed.is_empty()).then(|| trimmed.to_string())
            })
            .collect::<Vec<_>>(),
        SentenceRule::Punct { abbreviations } => punct_sentences(text, abbreviations),
    };
    spans.into_iter().enumerate().map(|(doc_index, text)| Sentence::new(text, doc_index)).collect()
}

fn punct_sentences(text: &str, abbreviations: &[String]) -> Vec<String> {
    let tokens = tokenize_words(text);
    let mut out = Vec::new();
    let mut first = 0;
    for i in 0..tokens.len() {
        let next = tokens.get(i + 1).map(|t| t.text.as_str());
        if ends_sentence(&tokens[i].text, next, abbreviations) {
            let (s, _) = tokens[first].char_span;
            let (_, e) = tokens[i].char_span;
            out.push(text[s..e].to_string());
            first = i + 1;
        }
    }
    out
}

fn ends_sentence(word: &str, next: Option<&str>, abbreviations: &[String]) -> bool {
    let Some(next) = next else {
        return true;
    };
    let core = word.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    if !core.ends_with(['.', '?', '!']) {
        return false;
    }
    if let Some(stem) = core.strip_suffix('.') {
        let lower = core.to_lowercase();
        if abbreviations.iter().any(|a| a.eq_ignore_ascii_case(&lower)) {
            return false;
        }
        // single-letter initials like "J."
        if stem.chars().count() == 1 && stem.chars().all(char::is_uppercase) {
            return false;
        }
    }
    next.trim_start_matches(['"', '\'', '(', '[', '\u{201c}', '\u{2018}'])
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

/// Greedy sentence-aligned chunking. The input must be in document order.
pub fn chunk_document(sentences: &[Sentence], cfg: &SegmentationConfig) -> Vec<Chunk> {
    let target = cfg.target_words.max(1);
    let mut chunks = Vec::new();
    let mut current: Vec<Sentence> = Vec::new();
    let mut words = 0;
    for sentence in sentences {
        words += sentence.word_count;
        current.push(sentence.clone());
        if words >= target {
            chunks.push(Chunk {
                chunk_index: chunks.len(),
                sentences: std::mem::take(&mut current),
                word_count: words,
            });
            words = 0;
        }
    }
    if !current.is_empty() {
        chunks.push(Chunk { chunk_index: chunks.len(), sentences: current, word_count: words });
    }
    chunks
}

/// Splits and chunks in one step.
pub fn segment(text: &str, cfg: &SegmentationConfig) -> (Vec<Sentence>, Vec<Chunk>) {
    let sentences = split_sentences(text, &cfg.sentence_rule);
    let chunks = chunk_document(&sentences, cfg);
    (sentences, chunks)
}

pub fn join_sentences(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&s.text);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ") + "."
    }

    fn texts(tokens: &[WordToken]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize_words("").is_empty());
        assert_eq!(texts(&tokenize_words("Hello, world!")), ["Hello,", "world!"]);
        let toks = tokenize_words("  a  b ");
        assert_eq!(texts(&toks), ["a", "b"]);
        assert_eq!(toks[0].char_span, (2, 3));
        assert_eq!(toks[1].char_span, (5, 6));
    }

    #[test]
    fn tokenize_handles_multibyte() {
        let toks = tokenize_words("café\u{00a0}naïve  x");
        assert_eq!(texts(&toks), ["café", "naïve", "x"]);
        for t in &toks {
            assert!(t.char_span.0 < t.char_span.1);
        }
    }

    #[test]
    fn split_examples() {
        let rule = SentenceRule::default();
        assert!(split_sentences("", &rule).is_empty());
        assert!(split_sentences("   \n\t ", &rule).is_empty());
        assert_eq!(split_sentences("No terminator here", &rule).len(), 1);
        let got: Vec<_> = split_sentences("A cat sat. Did it? Yes!", &rule).into_iter().map(|s| s.text).collect();
        assert_eq!(got, ["A cat sat.", "Did it?", "Yes!"]);
    }

    #[test]
    fn split_respects_abbreviations_and_lowercase() {
        let rule = SentenceRule::default();
        let got = split_sentences("Dr. Smith met J. Doe at 5 p.m. yesterday. Then he left.", &rule);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].text, "Dr. Smith met J. Doe at 5 p.m. yesterday.");
        assert_eq!(got[1].doc_index, 1);
        assert_eq!(got[1].word_count, 3);
    }

    #[test]
    fn split_closing_quote() {
        let rule = SentenceRule::default();
        let got = split_sentences("He said \"stop.\" Then silence.", &rule);
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn lines_rule() {
        let got = split_sentences("one two\n\n three \nfour", &SentenceRule::Lines);
        assert_eq!(got.iter().map(|s| s.text.as_str()).collect::<Vec<_>>(), ["one two", "three", "four"]);
    }

    fn sentences_of(sizes: &[usize]) -> Vec<Sentence> {
        sizes.iter().enumerate().map(|(i, &n)| Sentence::new(words(n, "w"), i)).collect()
    }

    #[test]
    fn chunk_examples() {
        let cfg = SegmentationConfig::with_target(256);
        let c = chunk_document(&sentences_of(&[100, 100, 100]), &cfg);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].word_count, 300);

        let c = chunk_document(&sentences_of(&[100; 6]), &cfg);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].sentences.iter().map(|s| s.doc_index).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(c[1].sentences.iter().map(|s| s.doc_index).collect::<Vec<_>>(), [3, 4, 5]);
        assert_eq!(c[1].chunk_index, 1);

        let c = chunk_document(&sentences_of(&[10]), &cfg);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].sentences.len(), 1);

        assert!(chunk_document(&[], &cfg).is_empty());
    }

    #[test]
    fn short_tail_is_kept() {
        let cfg = SegmentationConfig::with_target(10);
        let c = chunk_document(&sentences_of(&[6, 6, 3]), &cfg);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].word_count, 3);
    }
}
