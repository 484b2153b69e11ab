use aspectsum::embedder::{cosine_slices, offline_embed};
use aspectsum::metrics::{rouge_n_tokens, Tokenizer};
use aspectsum::promptgen::{estimate_tokens, truncate_to_budget, TokenEstimator};
use aspectsum::pruner::{select_top_w, ScoredSentence};
use aspectsum::segmenter::{
    chunk_document, split_sentences, tokenize_words, SegmentationConfig, Sentence, SentenceRule,
};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}",
        "[A-Z][a-z]{0,6}",
        "[a-z]{1,6}[.?!]",
        "[0-9]{1,3}",
        Just("Dr.".to_string()),
        Just("e.g.".to_string()),
        Just("J.".to_string()),
        Just("\"Yes.\"".to_string()),
    ]
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec((word(), prop_oneof![Just(" "), Just("  "), Just("\n")]), 0..120)
        .prop_map(|ws| ws.into_iter().map(|(w, sep)| w + sep).collect())
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn scored(spec: &[(u8, usize)]) -> Vec<ScoredSentence> {
    spec.iter()
        .enumerate()
        .map(|(i, &(score, len))| ScoredSentence {
            sentence: Sentence::new(vec!["w"; len].join(" "), i),
            chunk_index: 0,
            score: f64::from(score) / 8.0,
        })
        .collect()
}

fn indices(v: &[ScoredSentence]) -> Vec<usize> {
    v.iter().map(|s| s.sentence.doc_index).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sentences_partition_the_words(t in text()) {
        let sentences = split_sentences(&t, &SentenceRule::default());
        let joined: Vec<&str> = sentences.iter().flat_map(|s| words(&s.text)).collect();
        prop_assert_eq!(joined, words(&t));
        for (i, s) in sentences.iter().enumerate() {
            prop_assert_eq!(s.doc_index, i);
            prop_assert!(s.word_count > 0);
        }
    }

    #[test]
    fn chunks_partition_sentences(t in text(), target in 1usize..60) {
        let sentences = split_sentences(&t, &SentenceRule::default());
        let chunks = chunk_document(&sentences, &SegmentationConfig::with_target(target));
        let flat: Vec<Sentence> = chunks.iter().flat_map(|c| c.sentences.clone()).collect();
        prop_assert_eq!(&flat, &sentences);
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.chunk_index, i);
            prop_assert_eq!(c.word_count, c.sentences.iter().map(|s| s.word_count).sum::<usize>());
            if i + 1 < chunks.len() {
                let longest = c.sentences.iter().map(|s| s.word_count).max().unwrap();
                prop_assert!(target <= c.word_count && c.word_count < target + longest);
            }
        }
        let again = chunk_document(&split_sentences(&t, &SentenceRule::default()), &SegmentationConfig::with_target(target));
        prop_assert_eq!(again, chunks);
    }

    #[test]
    fn cosine_properties(
        a in prop::collection::vec(-100.0f64..100.0, 8..64),
        seed in any::<u64>(),
        alpha in 0.001f64..1000.0,
        beta in 0.001f64..1000.0,
    ) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * ((seed >> (i % 64)) & 1) as f64 - 1.0).collect();
        let ab = cosine_slices(&a, &b).unwrap();
        prop_assert_eq!(ab, cosine_slices(&b, &a).unwrap());
        prop_assert!((-1.0..=1.0).contains(&ab));
        let sa: Vec<f64> = a.iter().map(|x| x * alpha).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * beta).collect();
        prop_assert!((cosine_slices(&sa, &sb).unwrap() - ab).abs() < 1e-12);
        if a.iter().any(|x| *x != 0.0) {
            prop_assert!((cosine_slices(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn offline_vectors_are_unit_or_zero(t in text(), dim in 8usize..300, seed in any::<u64>()) {
        let v = offline_embed(&t, dim, seed);
        prop_assert_eq!(v.dim(), dim);
        if v.degenerate {
            prop_assert!(v.values.iter().all(|x| *x == 0.0));
        } else {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(v.values, offline_embed(&t, dim, seed).values);
    }

    #[test]
    fn truncation_is_a_fitting_word_prefix(t in text(), budget in 1usize..200, overhead in 0usize..50, cpt in 1.0f64..6.0) {
        let est = TokenEstimator::CharsPerToken { chars_per_token: cpt };
        if let Ok(out) = truncate_to_budget(&t, budget, overhead, &est) {
            prop_assert!(t.starts_with(&out));
            prop_assert!(est.estimate(&out) + overhead <= budget);
            let kept = words(&out);
            prop_assert_eq!(&words(&t)[..kept.len()], &kept[..]);
            // maximal: one more word would not fit
            let spans = tokenize_words(&t);
            if kept.len() < spans.len() {
                let next = &t[..spans[kept.len()].char_span.1];
                prop_assert!(est.estimate(next) + overhead > budget);
            }
        }
    }

    #[test]
    fn estimate_is_monotone(a in text(), b in text(), cpt in 0.5f64..8.0) {
        prop_assert!(estimate_tokens(&a, cpt) <= estimate_tokens(&(a.clone() + &b), cpt));
    }

    #[test]
    fn top_w_idempotent_and_scale_invariant(
        spec in prop::collection::vec((0u8..16, 1usize..20), 1..12),
        w in 1usize..80,
        scale in 1u32..64,
    ) {
        let s = scored(&spec);
        let first = select_top_w(&s, w);
        prop_assert_eq!(indices(&select_top_w(&first, w)), indices(&first));
        let scaled: Vec<ScoredSentence> = s
            .iter()
            .map(|x| ScoredSentence { score: x.score * f64::from(scale) * 0.37, ..x.clone() })
            .collect();
        prop_assert_eq!(indices(&select_top_w(&scaled, w)), indices(&first));
    }

    #[test]
    fn adding_a_matched_word_keeps_recall(
        cand in prop::collection::vec(0u8..8, 0..15),
        refr in prop::collection::vec(0u8..8, 1..15),
        pick in any::<prop::sample::Index>(),
        n in 1usize..3,
    ) {
        let tok = |v: &[u8]| v.iter().map(|x| format!("w{x}")).collect::<Vec<_>>();
        let before = rouge_n_tokens(&tok(&cand), &tok(&refr), n).recall;
        let mut more = cand.clone();
        more.push(refr[pick.index(refr.len())]);
        let after = rouge_n_tokens(&tok(&more), &tok(&refr), n).recall;
        prop_assert!(after >= before);
    }
}

#[test]
fn tokenizer_defaults() {
    assert_eq!(Tokenizer::rouge().tokens("The Cat, sat!"), ["the", "cat", "sat"]);
}
