//! METEOR with exact and Porter-stem matching stages (no synonym stage).
//!
//! The alignment maximizes the number of matched unigrams (exact matches
//! first, then stem matches among the leftovers) and, among all such
//! alignments, minimizes the number of chunks. The chunk search is exhaustive
//! branch-and-bound when both sides have at most [`EXACT_SEARCH_LIMIT`]
//! tokens and a single greedy descent beyond that.

use std::collections::HashMap;

use super::{porter, Tokenizer};

pub const EXACT_SEARCH_LIMIT: usize = 64;
/// Node budget for the exhaustive search. Once spent, the best complete
/// alignment found so far is used.
const NODE_BUDGET: usize = 2_000_000;

const ALPHA: f64 = 0.9;
const BETA: f64 = 3.0;
const GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorDetail {
    pub score: f64,
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
}

pub fn meteor(candidate: &str, reference: &str, tok: &Tokenizer) -> f64 {
    meteor_detail(candidate, reference, tok).score
}

pub fn meteor_detail(candidate: &str, reference: &str, tok: &Tokenizer) -> MeteorDetail {
    // METEOR always needs surface forms and stems, independent of tokenizer
    // stemming settings.
    let plain = Tokenizer { stem: false, ..*tok };
    let cand = plain.tokens(candidate);
    let refr = plain.tokens(reference);
    meteor_tokens(&cand, &refr)
}

pub fn meteor_tokens(cand: &[String], refr: &[String]) -> MeteorDetail {
    let zero =
        MeteorDetail { score: 0.0, matches: 0, chunks: 0, precision: 0.0, recall: 0.0, fmean: 0.0, penalty: 0.0 };
    if cand.is_empty() || refr.is_empty() {
        return zero;
    }
    let (matches, chunks) = align(cand, refr);
    if matches == 0 {
        return zero;
    }
    let precision = matches as f64 / cand.len() as f64;
    let recall = matches as f64 / refr.len() as f64;
    let fmean = precision * recall / (ALPHA * precision + (1.0 - ALPHA) * recall);
    let penalty = GAMMA * (chunks as f64 / matches as f64).powf(BETA);
    MeteorDetail { score: fmean * (1.0 - penalty), matches, chunks, precision, recall, fmean, penalty }
}

struct Interner<'a> {
    ids: HashMap<&'a str, usize>,
}

impl<'a> Interner<'a> {
    fn id(&mut self, s: &'a str) -> usize {
        let n = self.ids.len();
        *self.ids.entry(s).or_insert(n)
    }
}

struct Side {
    word: Vec<usize>,
    stem: Vec<usize>,
}

/// Returns `(matches, chunks)` of the chosen alignment.
fn align(cand: &[String], refr: &[String]) -> (usize, usize) {
    let cand_stems: Vec<String> = cand.iter().map(|w| porter::stem(w)).collect();
    let ref_stems: Vec<String> = refr.iter().map(|w| porter::stem(w)).collect();
    let mut words = Interner { ids: HashMap::new() };
    let mut stems = Interner { ids: HashMap::new() };
    let c = Side {
        word: cand.iter().map(|w| words.id(w)).collect(),
        stem: cand_stems.iter().map(|s| stems.id(s)).collect(),
    };
    let r = Side {
        word: refr.iter().map(|w| words.id(w)).collect(),
        stem: ref_stems.iter().map(|s| stems.id(s)).collect(),
    };
    let (nw, ns) = (words.ids.len(), stems.ids.len());

    let count = |ids: &[usize], n: usize| {
        let mut v = vec![0usize; n];
        ids.iter().for_each(|&i| v[i] += 1);
        v
    };
    let (cw, rw) = (count(&c.word, nw), count(&r.word, nw));
    let (cs, rs) = (count(&c.stem, ns), count(&r.stem, ns));
    // exact stage matches every shared surface form as often as possible;
    // the stem stage then pairs leftovers that share a stem
    let exact: Vec<usize> = (0..nw).map(|w| cw[w].min(rw[w])).collect();
    let mut word_stem = vec![0usize; nw];
    for (i, &w) in c.word.iter().enumerate() {
        word_stem[w] = c.stem[i];
    }
    for (i, &w) in r.word.iter().enumerate() {
        word_stem[w] = r.stem[i];
    }
    let mut exact_in_stem = vec![0usize; ns];
    for w in 0..nw {
        exact_in_stem[word_stem[w]] += exact[w];
    }
    let stem_only: Vec<usize> = (0..ns).map(|s| cs[s].min(rs[s]) - exact_in_stem[s]).collect();
    let matches = exact.iter().sum::<usize>() + stem_only.iter().sum::<usize>();
    if matches == 0 {
        return (0, 0);
    }

    let mut ref_by_stem: Vec<Vec<usize>> = vec![Vec::new(); ns];
    for (j, &s) in r.stem.iter().enumerate() {
        ref_by_stem[s].push(j);
    }
    // candidate tokens remaining at or after position i, per word and stem
    let n = c.word.len();
    let mut suffix_word: Vec<Vec<u32>> = Vec::new();
    let mut suffix_stem: Vec<Vec<u32>> = Vec::new();
    let sparse = n * (nw + ns) > 4_000_000;
    if !sparse {
        suffix_word = vec![vec![0u32; nw]; n + 1];
        suffix_stem = vec![vec![0u32; ns]; n + 1];
        for i in (0..n).rev() {
            suffix_word[i] = suffix_word[i + 1].clone();
            suffix_stem[i] = suffix_stem[i + 1].clone();
            suffix_word[i][c.word[i]] += 1;
            suffix_stem[i][c.stem[i]] += 1;
        }
    }

    let exhaustive = cand.len() <= EXACT_SEARCH_LIMIT && refr.len() <= EXACT_SEARCH_LIMIT;
    let mut search = Search {
        c: &c,
        r: &r,
        ref_by_stem: &ref_by_stem,
        suffix_word: &suffix_word,
        suffix_stem: &suffix_stem,
        sparse,
        used: vec![false; refr.len()],
        rem_exact: exact,
        rem_stem: stem_only,
        free_ref_word: rw,
        rem_class: (0..ns).map(|s| cs[s].min(rs[s])).collect(),
        best: usize::MAX,
        nodes: 0,
        budget: NODE_BUDGET,
        done: false,
    };
    if !exhaustive {
        return search.greedy();
    }
    search.dfs(0, None, 0);
    (matches, search.best)
}

struct Search<'a> {
    c: &'a Side,
    r: &'a Side,
    ref_by_stem: &'a [Vec<usize>],
    suffix_word: &'a [Vec<u32>],
    suffix_stem: &'a [Vec<u32>],
    sparse: bool,
    used: Vec<bool>,
    rem_exact: Vec<usize>,
    rem_stem: Vec<usize>,
    free_ref_word: Vec<usize>,
    /// Matches still owed per stem class (exact plus stem-only).
    rem_class: Vec<usize>,
    best: usize,
    nodes: usize,
    budget: usize,
    done: bool,
}

impl Search<'_> {
    fn cand_left_word(&self, i: usize, w: usize) -> usize {
        if self.sparse {
            self.c.word[i..].iter().filter(|&&x| x == w).count()
        } else {
            self.suffix_word[i][w] as usize
        }
    }

    fn cand_left_stem(&self, i: usize, s: usize) -> usize {
        if self.sparse {
            self.c.stem[i..].iter().filter(|&&x| x == s).count()
        } else {
            self.suffix_stem[i][s] as usize
        }
    }

    /// Legal pairings for candidate `i`, best-first: continuing the current
    /// chunk, then exact before stem, then by reference position.
    fn moves(&self, i: usize, prev: Option<usize>) -> Vec<(usize, bool)> {
        let w = self.c.word[i];
        let s = self.c.stem[i];
        let mut moves = Vec::new();
        if self.rem_class[s] == 0 {
            return moves;
        }
        let left_w = self.cand_left_word(i, w);
        for &j in &self.ref_by_stem[s] {
            if self.used[j] {
                continue;
            }
            let rw = self.r.word[j];
            if rw == w {
                if self.rem_exact[w] > 0 {
                    moves.push((j, true));
                }
            } else if self.rem_stem[s] > 0 && left_w > self.rem_exact[w] && self.free_ref_word[rw] > self.rem_exact[rw]
            {
                moves.push((j, false));
            }
        }
        moves.sort_by_key(|&(j, exact)| (prev.is_none_or(|p| p + 1 != j), !exact, j));
        moves
    }

    /// Skipping `i` must leave enough later candidates to meet the quotas.
    fn can_skip(&self, i: usize) -> bool {
        let (w, s) = (self.c.word[i], self.c.stem[i]);
        self.cand_left_word(i, w) > self.rem_exact[w] && self.cand_left_stem(i, s) > self.rem_class[s]
    }

    fn take(&mut self, i: usize, j: usize, exact: bool) {
        let rw = self.r.word[j];
        self.used[j] = true;
        self.free_ref_word[rw] -= 1;
        self.rem_class[self.c.stem[i]] -= 1;
        if exact {
            self.rem_exact[self.c.word[i]] -= 1;
        } else {
            self.rem_stem[self.c.stem[i]] -= 1;
        }
    }

    fn untake(&mut self, i: usize, j: usize, exact: bool) {
        let rw = self.r.word[j];
        self.used[j] = false;
        self.free_ref_word[rw] += 1;
        self.rem_class[self.c.stem[i]] += 1;
        if exact {
            self.rem_exact[self.c.word[i]] += 1;
        } else {
            self.rem_stem[self.c.stem[i]] += 1;
        }
    }

    fn dfs(&mut self, i: usize, prev: Option<usize>, chunks: usize) {
        if self.done {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget && self.best != usize::MAX {
            self.done = true;
            return;
        }
        if chunks >= self.best {
            return;
        }
        if i == self.c.word.len() {
            if self.rem_class.iter().all(|&x| x == 0) {
                self.best = chunks;
                if chunks <= 1 {
                    self.done = true;
                }
            }
            return;
        }
        for (j, exact) in self.moves(i, prev) {
            let new_chunks = if prev.is_some_and(|p| p + 1 == j) { chunks } else { chunks + 1 };
            self.take(i, j, exact);
            self.dfs(i + 1, Some(j), new_chunks);
            self.untake(i, j, exact);
            if self.done {
                return;
            }
        }
        if self.can_skip(i) {
            self.dfs(i + 1, None, chunks);
        }
    }

    /// One left-to-right pass taking the best-first move at each position.
    /// Returns `(matches, chunks)` actually realized.
    fn greedy(&mut self) -> (usize, usize) {
        let (mut prev, mut matched, mut chunks) = (None, 0, 0);
        for i in 0..self.c.word.len() {
            match self.moves(i, prev).first().copied() {
                Some((j, exact)) => {
                    if !prev.is_some_and(|p: usize| p + 1 == j) {
                        chunks += 1;
                    }
                    self.take(i, j, exact);
                    matched += 1;
                    prev = Some(j);
                }
                None => prev = None,
            }
        }
        (matched, chunks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Tokenizer {
        Tokenizer::meteor()
    }

    #[test]
    fn identical_five_words() {
        let d = meteor_detail("the quick brown fox jumps", "the quick brown fox jumps", &t());
        assert_eq!((d.matches, d.chunks), (5, 1));
        assert!((d.penalty - 0.004).abs() < 1e-15);
        assert!((d.score - 0.996).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(meteor("alpha beta", "gamma delta", &t()), 0.0);
        assert_eq!(meteor("", "gamma delta", &t()), 0.0);
    }

    #[test]
    fn stem_stage_matches() {
        let d = meteor_detail("cats run", "cat runs", &t());
        assert_eq!((d.matches, d.chunks), (2, 1));
        // P = R = 1, Fmean = 1, penalty = 0.5 * (1/2)^3
        assert!((d.score - (1.0 - 0.0625)).abs() < 1e-12);
    }

    #[test]
    fn chunks_minimized_over_repeated_words() {
        // greedy left-to-right would pair the first "the" with ref position 0
        // and split the run; the optimum aligns "the cat" as one chunk
        let d = meteor_detail("the cat", "the dog the cat", &t());
        assert_eq!((d.matches, d.chunks), (2, 1));
    }

    #[test]
    fn reordered_words_make_more_chunks() {
        let d = meteor_detail("c d a b", "a b c d", &t());
        assert_eq!((d.matches, d.chunks), (4, 2));
        let d = meteor_detail("d c b a", "a b c d", &t());
        assert_eq!(d.chunks, 4);
    }

    #[test]
    fn exact_preferred_over_stem() {
        // "runs" must match "runs" exactly; "run" then stem-matches "running"
        let d = meteor_detail("runs run", "running runs", &t());
        assert_eq!(d.matches, 2);
        assert_eq!(d.chunks, 2);
    }

    #[test]
    fn long_inputs_use_greedy_path() {
        let a: Vec<String> = (0..100).map(|i| format!("w{}", i % 13)).collect();
        let d = meteor_tokens(&a, &a);
        assert_eq!(d.matches, 100);
        assert!(d.chunks >= 1 && d.score > 0.9);
    }
}
