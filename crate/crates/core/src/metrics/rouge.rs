use std::collections::HashMap;

use super::{Prf, Tokenizer};

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n(candidate: &str, reference: &str, n: usize, tok: &Tokenizer) -> Prf {
    assert!(n >= 1, "n must be positive");
    let cand = tok.tokens(candidate);
    let refr = tok.tokens(reference);
    rouge_n_tokens(&cand, &refr, n)
}

pub fn rouge_n_tokens<T: AsRef<str>>(cand: &[T], refr: &[T], n: usize) -> Prf {
    let cand_counts = ngram_counts(cand, n);
    let ref_counts = ngram_counts(refr, n);
    let cand_total: usize = cand_counts.values().sum();
    let ref_total: usize = ref_counts.values().sum();
    if cand_total == 0 || ref_total == 0 {
        return Prf::ZERO;
    }
    let overlap: usize = cand_counts.iter().map(|(g, c)| ref_counts.get(g).map_or(0, |r| (*c).min(*r))).sum();
    Prf::from_counts(overlap, cand_total, ref_total)
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-L over whole token sequences.
pub fn rouge_l(candidate: &str, reference: &str, tok: &Tokenizer) -> Prf {
    let cand = tok.tokens(candidate);
    let refr = tok.tokens(reference);
    rouge_l_tokens(&cand, &refr)
}

pub fn rouge_l_tokens<T: AsRef<str>>(cand: &[T], refr: &[T]) -> Prf {
    if cand.is_empty() || refr.is_empty() {
        return Prf::ZERO;
    }
    Prf::from_counts(lcs_len(cand, refr), cand.len(), refr.len())
}

/// Longest common subsequence length, bit-parallel over the candidate
/// (64 positions per word, one pass per reference token).
pub fn lcs_len<T: AsRef<str>>(cand: &[T], refr: &[T]) -> usize {
    let n = cand.len();
    if n == 0 || refr.is_empty() {
        return 0;
    }
    let words = n.div_ceil(64);
    let mut masks: HashMap<&str, Vec<u64>> = HashMap::new();
    for (i, t) in cand.iter().enumerate() {
        masks.entry(t.as_ref()).or_insert_with(|| vec![0; words])[i / 64] |= 1 << (i % 64);
    }
    let mut v = vec![u64::MAX; words];
    for t in refr {
        let Some(m) = masks.get(t.as_ref()) else { continue };
        // v = (v + (v & m)) | (v & !m), with carries across words
        let mut carry = 0u64;
        for k in 0..words {
            let u = v[k] & m[k];
            let (s1, c1) = v[k].overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = u64::from(c1 || c2);
            v[k] = s2 | (v[k] & !m[k]);
        }
    }
    let tail = n % 64;
    let mut zeros = 0;
    for (k, word) in v.iter().enumerate() {
        let valid = if k == words - 1 && tail != 0 { (1u64 << tail) - 1 } else { u64::MAX };
        zeros += (!word & valid).count_ones() as usize;
    }
    zeros
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Tokenizer {
        Tokenizer::rouge()
    }

    fn close(a: Prf, p: f64, r: f64, f: f64) {
        assert!((a.precision - p).abs() < 1e-12, "{a:?}");
        assert!((a.recall - r).abs() < 1e-12, "{a:?}");
        assert!((a.f1 - f).abs() < 1e-12, "{a:?}");
    }

    #[test]
    fn rouge_n_examples() {
        close(rouge_n("the cat sat", "the cat sat", 1, &t()), 1.0, 1.0, 1.0);
        close(rouge_n("the cat sat", "the cat sat", 2, &t()), 1.0, 1.0, 1.0);
        close(rouge_n("the cat sat", "the cat ran", 1, &t()), 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0);
        close(rouge_n("the cat sat", "the cat ran", 2, &t()), 0.5, 0.5, 0.5);
        close(rouge_n("alpha beta", "gamma delta", 1, &t()), 0.0, 0.0, 0.0);
        close(rouge_n("", "gamma", 1, &t()), 0.0, 0.0, 0.0);
        close(rouge_n("one", "one", 2, &t()), 0.0, 0.0, 0.0);
    }

    #[test]
    fn clipping() {
        // candidate repeats "the" three times, reference has it once
        close(rouge_n("the the the", "the cat", 1, &t()), 1.0 / 3.0, 0.5, 0.4);
    }

    #[test]
    fn rouge_l_examples() {
        close(rouge_l("the cat sat on mat", "the cat mat", &t()), 0.6, 1.0, 0.75);
        close(rouge_l("a b c", "a b c", &t()), 1.0, 1.0, 1.0);
        close(rouge_l("", "a b c", &t()), 0.0, 0.0, 0.0);
    }

    #[test]
    fn lcs_crosses_word_boundaries() {
        let a: Vec<String> = (0..150).map(|i| format!("t{}", i % 7)).collect();
        let b: Vec<String> = (0..130).map(|i| format!("t{}", (i * 3) % 7)).collect();
        assert_eq!(lcs_len(&a, &b), lcs_table(&a, &b));
        assert_eq!(lcs_len(&a, &a), 150);
    }

    fn lcs_table(a: &[String], b: &[String]) -> usize {
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
            }
        }
        t[a.len()][b.len()]
    }
}
