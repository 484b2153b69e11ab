//! ROUGE-1/2/L and METEOR for summary evaluation.

mod meteor;
pub mod porter;
mod rouge;

use serde::{Deserialize, Serialize};

pub use meteor::{meteor, meteor_detail, meteor_tokens, MeteorDetail, EXACT_SEARCH_LIMIT};
pub use rouge::{lcs_len, rouge_l, rouge_l_tokens, rouge_n, rouge_n_tokens};

/// Token normalization shared by all metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tokenizer {
    pub lowercase: bool,
    /// Replace every non-alphanumeric character with a space.
    pub strip_punct: bool,
    /// Apply the Porter stemmer to every token.
    pub stem: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::rouge()
    }
}

impl Tokenizer {
    pub fn rouge() -> Self {
        Self { lowercase: true, strip_punct: true, stem: false }
    }

    /// METEOR does its own stemming in the second matching stage.
    pub fn meteor() -> Self {
        Self { lowercase: true, strip_punct: true, stem: false }
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        let text = if self.lowercase { text.to_lowercase() } else { text.to_string() };
        let text: String = if self.strip_punct {
            text.chars().map(|c| if c.is_alphanumeric() { c } else { ' ' }).collect()
        } else {
            text
        };
        text.split_whitespace().map(|t| if self.stem { porter::stem(t) } else { t.to_string() }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf { precision: 0.0, recall: 0.0, f1: 0.0 };

    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1 }
    }

    fn from_counts(overlap: usize, cand_total: usize, ref_total: usize) -> Self {
        Self::new(overlap as f64 / cand_total as f64, overlap as f64 / ref_total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub rouge: Tokenizer,
    pub meteor: Tokenizer,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { rouge: Tokenizer::rouge(), meteor: Tokenizer::meteor() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub meteor: f64,
}

impl MetricReport {
    /// Every value in the report, for range checks.
    pub fn values(&self) -> [f64; 10] {
        let r = [self.rouge1, self.rouge2, self.rouge_l];
        [
            r[0].precision,
            r[0].recall,
            r[0].f1,
            r[1].precision,
            r[1].recall,
            r[1].f1,
            r[2].precision,
            r[2].recall,
            r[2].f1,
            self.meteor,
        ]
    }

    /// Arithmetic mean of several reports, component-wise. Returns `None`
    /// for an empty slice.
    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: &dyn Fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let prf = |g: &dyn Fn(&MetricReport) -> Prf| Prf {
            precision: avg(&|r| g(r).precision),
            recall: avg(&|r| g(r).recall),
            f1: avg(&|r| g(r).f1),
        };
        Some(MetricReport {
            rouge1: prf(&|r| r.rouge1),
            rouge2: prf(&|r| r.rouge2),
            rouge_l: prf(&|r| r.rouge_l),
            meteor: avg(&|r| r.meteor),
        })
    }
}

pub fn evaluate_pair(candidate: &str, reference: &str, cfg: &MetricConfig) -> MetricReport {
    let cand = cfg.rouge.tokens(candidate);
    let refr = cfg.rouge.tokens(reference);
    MetricReport {
        rouge1: rouge_n_tokens(&cand, &refr, 1),
        rouge2: rouge_n_tokens(&cand, &refr, 2),
        rouge_l: rouge_l_tokens(&cand, &refr),
        meteor: meteor(candidate, reference, &cfg.meteor),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_normalizes() {
        assert_eq!(Tokenizer::rouge().tokens("The Cat's hat, sat!"), ["the", "cat", "s", "hat", "sat"]);
        let stemmed = Tokenizer { stem: true, ..Tokenizer::rouge() };
        assert_eq!(stemmed.tokens("Running cats"), ["run", "cat"]);
    }

    #[test]
    fn f1_zero_when_both_zero() {
        assert_eq!(Prf::new(0.0, 0.0).f1, 0.0);
        assert!((Prf::new(0.5, 1.0).f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn report_for_identical_text() {
        let r = evaluate_pair("the quick brown fox jumps", "the quick brown fox jumps", &MetricConfig::default());
        assert_eq!(r.rouge1.f1, 1.0);
        assert_eq!(r.rouge2.f1, 1.0);
        assert_eq!(r.rouge_l.f1, 1.0);
        assert!(r.meteor > 0.99);
        assert!(r.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn mean_is_componentwise() {
        let a = evaluate_pair("a b", "a b", &MetricConfig::default());
        let b = evaluate_pair("x", "y", &MetricConfig::default());
        let m = MetricReport::mean(&[a, b]).unwrap();
        assert_eq!(m.rouge1.f1, 0.5);
        assert!(MetricReport::mean(&[]).is_none());
    }
}
