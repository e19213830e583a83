//! Seeded synthetic data with a known retrieval signal.
//!
//! Text comes from a sparse first-order word chain over a Zipfian
//! vocabulary. The generator LM is trained on an independent sample of the
//! same chain, so it knows the language but not the corpus. Evaluation texts
//! are shuffled concatenations of corpus passages, so the passage being
//! read is always retrievable.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_documents, Document, Passage, PassageSet, DEFAULT_WORDS_PER_PASSAGE};
use crate::error::Result;
use crate::rerank::{RerankCandidate, RerankExample};

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "to", "vi", "ba", "de", "fo", "gu", "ha", "ji", "pe", "zo",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub vocab_size: usize,
    /// Preferred successors per word.
    pub successors: usize,
    /// Probability of following a preferred successor instead of a Zipf draw.
    pub chain_strength: f64,
    pub num_docs: usize,
    pub words_per_doc: usize,
    pub lm_training_words: usize,
    pub num_eval_texts: usize,
    pub passages_per_eval_text: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            vocab_size: 8000,
            successors: 4,
            chain_strength: 0.3,
            num_docs: 60,
            words_per_doc: 300,
            lm_training_words: 20_000,
            num_eval_texts: 2,
            passages_per_eval_text: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub documents: Vec<Document>,
    pub passages: PassageSet,
    pub lm_training_text: String,
    pub eval_texts: Vec<String>,
}

/// Pronounceable distinct word for every index.
pub fn pseudo_word(mut index: usize) -> String {
    let mut out = String::new();
    loop {
        out.push_str(SYLLABLES[index % SYLLABLES.len()]);
        index /= SYLLABLES.len();
        if index == 0 {
            break;
        }
        index -= 1;
    }
    out
}

struct WordChain {
    words: Vec<String>,
    zipf: WeightedIndex<f64>,
    successors: Vec<Vec<usize>>,
    strength: f64,
}

impl WordChain {
    fn new(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Self {
        let v = cfg.vocab_size.max(2);
        let words = (0..v).map(pseudo_word).collect();
        let zipf = WeightedIndex::new((1..=v).map(|r| 1.0 / r as f64)).expect("positive weights");
        let successors = (0..v)
            .map(|_| {
                (0..cfg.successors.max(1))
                    .map(|_| rng.gen_range(0..v))
                    .collect()
            })
            .collect();
        WordChain {
            words,
            zipf,
            successors,
            strength: cfg.chain_strength,
        }
    }

    fn sample(&self, len: usize, rng: &mut ChaCha8Rng) -> String {
        let mut out = Vec::with_capacity(len);
        let mut prev = self.zipf.sample(rng);
        for _ in 0..len {
            let next = if rng.gen_bool(self.strength) {
                *self.successors[prev].choose(rng).expect("nonempty")
            } else {
                self.zipf.sample(rng)
            };
            out.push(self.words[next].as_str());
            prev = next;
        }
        out.join(" ")
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chain = WordChain::new(cfg, &mut rng);
    let documents: Vec<Document> = (0..cfg.num_docs)
        .map(|i| Document {
            doc_id: format!("doc{i:04}"),
            title: Some(format!("Synthetic article {i}")),
            text: chain.sample(cfg.words_per_doc, &mut rng),
        })
        .collect();
    let passages = chunk_documents(&documents, DEFAULT_WORDS_PER_PASSAGE)?;
    let lm_training_text = chain.sample(cfg.lm_training_words, &mut rng);

    let ids: Vec<usize> = (0..passages.len()).collect();
    let eval_texts = (0..cfg.num_eval_texts)
        .map(|_| {
            ids.choose_multiple(&mut rng, cfg.passages_per_eval_text.min(ids.len()))
                .map(|&id| passages.passages()[id].text.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    Ok(SyntheticSuite {
        documents,
        passages,
        lm_training_text,
        eval_texts,
    })
}

/// Reranker examples whose highest-likelihood candidate is always the one
/// with the largest unigram overlap with the prefix window.
///
/// Each example has `k` candidates mixing a random share of the window's
/// words with filler; retriever scores and lengths are random, so only the
/// overlap features carry signal.
pub fn overlap_aligned_examples(
    num_examples: usize,
    k: usize,
    query_len: usize,
    seed: u64,
) -> Vec<RerankExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..500).map(pseudo_word).collect();
    let k = k.max(2);
    let mut out = Vec::with_capacity(num_examples);
    while out.len() < num_examples {
        let window: Vec<&str> = (0..query_len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].as_str())
            .collect();
        let mut shares: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut candidates = Vec::with_capacity(k);
        let mut overlaps = Vec::with_capacity(k);
        for (rank, share) in shares.iter_mut().enumerate() {
            let mut words: Vec<&str> = window
                .iter()
                .filter(|_| rng.gen_bool(*share))
                .copied()
                .collect();
            let filler = rng.gen_range(5..60);
            words.extend((0..filler).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()));
            words.shuffle(&mut rng);
            let text = words.join(" ");
            let distinct_window: std::collections::HashSet<&str> = window.iter().copied().collect();
            let passage_words: std::collections::HashSet<&str> = words.iter().copied().collect();
            overlaps.push(
                distinct_window.intersection(&passage_words).count() as f64
                    / distinct_window.len() as f64,
            );
            candidates.push(RerankCandidate {
                passage: Passage {
                    passage_id: rank,
                    source_doc_id: format!("synthetic{rank}"),
                    title: None,
                    word_span: (0, words.len()),
                    text,
                },
                retriever_score: rng.gen_range(0.0..20.0),
                rank,
            });
        }
        let best = crate::rerank::argmax_first(&overlaps);
        if overlaps.iter().filter(|&&o| o == overlaps[best]).count() > 1 {
            continue;
        }
        let lm_logliks = overlaps
            .iter()
            .map(|o| -12.0 + 8.0 * o + rng.gen_range(-0.5..0.0))
            .enumerate()
            .map(|(i, ll)| if i == best { ll + 1.0 } else { ll })
            .collect();
        out.push(RerankExample {
            prefix_text: window.join(" "),
            candidates,
            lm_logliks,
            y_text: String::new(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_words_are_distinct() {
        let words: std::collections::HashSet<_> = (0..5000).map(pseudo_word).collect();
        assert_eq!(words.len(), 5000);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig {
            num_docs: 5,
            lm_training_words: 500,
            ..SyntheticConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.eval_texts, b.eval_texts);
        assert_eq!(a.passages, b.passages);
        assert_eq!(a.passages.len(), 15);
    }

    #[test]
    fn aligned_examples_put_best_loglik_on_max_overlap() {
        for ex in overlap_aligned_examples(30, 8, 32, 1) {
            let f: Vec<_> = ex.features(32);
            let best_overlap =
                crate::rerank::argmax_first(&f.iter().map(|x| x[1]).collect::<Vec<_>>());
            assert_eq!(ex.best_candidate(), best_overlap);
        }
    }
}
