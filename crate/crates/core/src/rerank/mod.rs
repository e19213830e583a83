//! Choosing one of the top-k retrieved passages.
//!
//! Zero-shot reranking asks an LM how well each candidate predicts the most
//! recent prefix tokens. Predictive reranking trains a small linear scorer
//! over lexical features with a listwise loss whose targets are the
//! generator's likelihoods of the upcoming text.

mod collect;
mod features;
mod predictive;
mod zero_shot;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;

pub use collect::{collect_training_examples, load_examples, save_examples, CollectConfig};
pub use features::{extract_features, FeatureVector, FEATURE_SPEC_VERSION, NUM_FEATURES};
pub use predictive::{
    listwise_loss_and_grad, loss_and_grad, predictive_rerank, train, LossAndGrad,
    PredictiveReranker, RerankExample, TrainConfig, TrainOutcome,
};
pub use zero_shot::{candidate_logliks, zero_shot_rerank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankCandidate {
    pub passage: Passage,
    pub retriever_score: f64,
    /// Position in the retriever's list, from 0.
    pub rank: usize,
}

/// Index of the first maximum; NaN entries never win. Empty input gives 0.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}
