use std::collections::HashSet;

use super::RerankCandidate;
use crate::text::LmTokenizer;

pub const FEATURE_SPEC_VERSION: &str = "lexical-v1";
pub const NUM_FEATURES: usize = 5;

pub type FeatureVector = [f64; NUM_FEATURES];

const RECENCY_HALF_LIFE: f64 = 8.0;
const LENGTH_CAP: usize = 256;

/// Lexical features of one candidate against the last `query_len` prefix
/// tokens (the window). All lie in `[0, 1]`.
///
/// | idx | feature |
/// |-----|---------|
/// | 0 | `score / (1 + score)` of the retriever score |
/// | 1 | share of distinct window unigrams found in the passage |
/// | 2 | share of distinct window bigrams found in the passage |
/// | 3 | window overlap weighted by `2^(-d/8)`, `d` = distance from the prefix end |
/// | 4 | `ln(1 + passage tokens) / ln(257)`, length capped at 256 |
///
/// An empty window gives 0 for features 1 to 3.
pub fn extract_features<S: AsRef<str>>(
    prefix_tokens: &[S],
    candidate: &RerankCandidate,
    query_len: usize,
) -> FeatureVector {
    let score = candidate.retriever_score.max(0.0);
    let retriever = score / (1.0 + score);

    let passage = LmTokenizer.tokenize(&candidate.passage.text);
    let passage_len = passage.len().min(LENGTH_CAP) as f64;
    let length = (1.0 + passage_len).ln() / ((LENGTH_CAP + 1) as f64).ln();

    let start = prefix_tokens.len().saturating_sub(query_len);
    let window: Vec<&str> = prefix_tokens[start..].iter().map(AsRef::as_ref).collect();
    if window.is_empty() {
        return [retriever, 0.0, 0.0, 0.0, length];
    }

    let passage_unigrams: HashSet<&str> = passage.iter().map(String::as_str).collect();
    let passage_bigrams: HashSet<(&str, &str)> = passage
        .windows(2)
        .map(|w| (w[0].as_str(), w[1].as_str()))
        .collect();

    let window_unigrams: HashSet<&str> = window.iter().copied().collect();
    let unigram = window_unigrams
        .iter()
        .filter(|t| passage_unigrams.contains(*t))
        .count() as f64
        / window_unigrams.len() as f64;

    let window_bigrams: HashSet<(&str, &str)> = window.windows(2).map(|w| (w[0], w[1])).collect();
    let bigram = if window_bigrams.is_empty() {
        0.0
    } else {
        window_bigrams
            .iter()
            .filter(|b| passage_bigrams.contains(*b))
            .count() as f64
            / window_bigrams.len() as f64
    };

    let mut hit = 0.0;
    let mut total = 0.0;
    for (i, t) in window.iter().enumerate() {
        let distance = (window.len() - 1 - i) as f64;
        let w = (-distance / RECENCY_HALF_LIFE).exp2();
        total += w;
        if passage_unigrams.contains(t) {
            hit += w;
        }
    }

    [retriever, unigram, bigram, hit / total, length]
}
