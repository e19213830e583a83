//! Linear predictive reranker trained with the listwise marginal-likelihood
//! loss
//!
//! ```text
//! L = −ln Σ_i p_rank(d_i | x) · p_lm(y | [d_i; x]),   p_rank = softmax(f),  f_i = w·φ_i + b
//! ```
//!
//! Likelihoods are shifted by their maximum before exponentiation. The shift
//! adds a constant to `L` and leaves every gradient unchanged.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureVector, FEATURE_SPEC_VERSION, NUM_FEATURES};
use super::{argmax_first, RerankCandidate};
use crate::error::{RalmError, Result};
use crate::text::LmTokenizer;

const MODEL_FORMAT_VERSION: u32 = 1;
const DIVERGENCE_STREAK: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankExample {
    /// Prefix as the generator saw it (left-truncated to its window).
    pub prefix_text: String,
    pub candidates: Vec<RerankCandidate>,
    /// `ln p(y | [d_i; prefix])` per candidate.
    pub lm_logliks: Vec<f64>,
    pub y_text: String,
}

impl RerankExample {
    fn check(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(RalmError::RejectedExample("no candidates".into()));
        }
        if self.lm_logliks.len() != self.candidates.len() {
            return Err(RalmError::RejectedExample(format!(
                "{} logliks for {} candidates",
                self.lm_logliks.len(),
                self.candidates.len()
            )));
        }
        if self.lm_logliks.iter().any(|l| !l.is_finite()) {
            return Err(RalmError::RejectedExample(
                "non-finite log-likelihood".into(),
            ));
        }
        Ok(())
    }

    pub fn features(&self, query_len: usize) -> Vec<FeatureVector> {
        let prefix = LmTokenizer.tokenize(&self.prefix_text);
        self.candidates
            .iter()
            .map(|c| extract_features(&prefix, c, query_len))
            .collect()
    }

    /// Index of the candidate with the highest likelihood, lowest rank on ties.
    pub fn best_candidate(&self) -> usize {
        argmax_first(&self.lm_logliks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveReranker {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_spec_version: String,
}

impl Default for PredictiveReranker {
    fn default() -> Self {
        PredictiveReranker::zeros()
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: PredictiveReranker,
}

impl PredictiveReranker {
    pub fn zeros() -> Self {
        PredictiveReranker {
            weights: vec![0.0; NUM_FEATURES],
            bias: 0.0,
            feature_spec_version: FEATURE_SPEC_VERSION.to_string(),
        }
    }

    pub fn check_spec(&self) -> Result<()> {
        if self.feature_spec_version != FEATURE_SPEC_VERSION || self.weights.len() != NUM_FEATURES {
            return Err(RalmError::FeatureSpecMismatch {
                model: format!(
                    "{} ({} weights)",
                    self.feature_spec_version,
                    self.weights.len()
                ),
                extractor: format!("{FEATURE_SPEC_VERSION} ({NUM_FEATURES} weights)"),
            });
        }
        Ok(())
    }

    pub fn logit(&self, features: &FeatureVector) -> f64 {
        self.weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias
    }

    /// Softmax of the logits over a candidate list.
    pub fn p_rank(&self, features: &[FeatureVector]) -> Vec<f64> {
        let f: Vec<f64> = features.iter().map(|x| self.logit(x)).collect();
        let lse = log_sum_exp(&f);
        f.iter().map(|v| (v - lse).exp()).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| RalmError::Corruption(e.to_string()))?;
        fs::write(path, text).map_err(|e| RalmError::io(path, e))
    }

    /// Refuses models built for a different feature spec.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| RalmError::io(path, e))?;
        let file: ModelFile = serde_json::from_slice(&bytes)
            .map_err(|e| RalmError::Corruption(format!("reranker model: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(RalmError::Corruption(format!(
                "unsupported reranker model version {}",
                file.format_version
            )));
        }
        file.model.check_spec()?;
        Ok(file.model)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    /// Loss with likelihoods shifted by their maximum.
    pub loss: f64,
    /// `max_i lm_loglik_i`, the shift applied.
    pub max_loglik: f64,
    /// `∂L/∂f_i`.
    pub grad_logits: Vec<f64>,
    pub grad_weights: Vec<f64>,
    pub grad_bias: f64,
}

impl LossAndGrad {
    /// `−ln Σ_i p_rank(d_i) · p_lm(y | d_i)` without the shift.
    pub fn unstabilized_loss(&self) -> f64 {
        self.loss - self.max_loglik
    }
}

/// Loss and gradients for one candidate list given its features.
pub fn listwise_loss_and_grad(
    features: &[FeatureVector],
    lm_logliks: &[f64],
    model: &PredictiveReranker,
) -> Result<LossAndGrad> {
    if features.is_empty() || features.len() != lm_logliks.len() {
        return Err(RalmError::RejectedExample(format!(
            "{} feature rows for {} logliks",
            features.len(),
            lm_logliks.len()
        )));
    }
    if lm_logliks.iter().any(|l| !l.is_finite()) {
        return Err(RalmError::RejectedExample(
            "non-finite log-likelihood".into(),
        ));
    }
    let logits: Vec<f64> = features.iter().map(|x| model.logit(x)).collect();
    let log_norm = log_sum_exp(&logits);
    let max_loglik = lm_logliks.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // ln(p_i · w̃_i) with w̃_i = exp(ll_i − max)
    let joint: Vec<f64> = logits
        .iter()
        .zip(lm_logliks)
        .map(|(f, ll)| (f - log_norm) + (ll - max_loglik))
        .collect();
    let log_z = log_sum_exp(&joint);

    // ∂L/∂f_i = p_i − p_i·w̃_i / Z
    let grad_logits: Vec<f64> = logits
        .iter()
        .zip(&joint)
        .map(|(f, j)| (f - log_norm).exp() - (j - log_z).exp())
        .collect();
    let mut grad_weights = vec![0.0; model.weights.len()];
    for (g, x) in grad_logits.iter().zip(features) {
        for (gw, xv) in grad_weights.iter_mut().zip(x) {
            *gw += g * xv;
        }
    }
    let grad_bias = grad_logits.iter().sum();
    Ok(LossAndGrad {
        loss: -log_z,
        max_loglik,
        grad_logits,
        grad_weights,
        grad_bias,
    })
}

pub fn loss_and_grad(
    example: &RerankExample,
    model: &PredictiveReranker,
    query_len: usize,
) -> Result<LossAndGrad> {
    example.check()?;
    listwise_loss_and_grad(&example.features(query_len), &example.lm_logliks, model)
}

/// Candidate with the highest logit (equivalently the highest `p_rank`),
/// lowest rank on ties.
pub fn predictive_rerank<S: AsRef<str>>(
    candidates: &[RerankCandidate],
    prefix_tokens: &[S],
    model: &PredictiveReranker,
    query_len: usize,
) -> Result<usize> {
    model.check_spec()?;
    let logits: Vec<f64> = candidates
        .iter()
        .map(|c| model.logit(&extract_features(prefix_tokens, c, query_len)))
        .collect();
    Ok(argmax_first(&logits))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
    pub query_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.1,
            steps: 2000,
            seed: 0,
            query_len: crate::engine::DEFAULT_QUERY_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: PredictiveReranker,
    /// Mean loss before each step, then after the last one.
    pub loss_trajectory: Vec<f64>,
    /// Example order used for accumulation.
    pub example_order: Vec<usize>,
}

/// Full-batch gradient descent on the mean loss, starting from zero weights.
pub fn train(examples: &[RerankExample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if examples.is_empty() {
        return Err(RalmError::InvalidArgument(
            "training needs at least one example".into(),
        ));
    }
    for ex in examples {
        ex.check()?;
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let batch: Vec<(Vec<FeatureVector>, &[f64])> = order
        .iter()
        .map(|&i| {
            (
                examples[i].features(cfg.query_len),
                examples[i].lm_logliks.as_slice(),
            )
        })
        .collect();

    let mut model = PredictiveReranker::zeros();
    let mut trajectory = Vec::with_capacity(cfg.steps + 1);
    let mut rising = 0;
    let n = batch.len() as f64;

    for step in 0..=cfg.steps {
        let mut loss = 0.0;
        let mut gw = vec![0.0; NUM_FEATURES];
        let mut gb = 0.0;
        for (features, logliks) in &batch {
            let g = listwise_loss_and_grad(features, logliks, &model)?;
            loss += g.loss;
            for (a, b) in gw.iter_mut().zip(&g.grad_weights) {
                *a += b;
            }
            gb += g.grad_bias;
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(RalmError::Divergence {
                step,
                streak: 0,
                loss,
            });
        }
        if let Some(&prev) = trajectory.last() {
            rising = if loss > prev { rising + 1 } else { 0 };
            if rising >= DIVERGENCE_STREAK {
                return Err(RalmError::Divergence {
                    step,
                    streak: rising,
                    loss,
                });
            }
        }
        trajectory.push(loss);
        if step == cfg.steps {
            break;
        }
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= cfg.lr * g / n;
        }
        model.bias -= cfg.lr * gb / n;
    }

    Ok(TrainOutcome {
        model,
        loss_trajectory: trajectory,
        example_order: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;
    use rand::Rng;

    fn model(weights: [f64; 5], bias: f64) -> PredictiveReranker {
        PredictiveReranker {
            weights: weights.to_vec(),
            bias,
            feature_spec_version: FEATURE_SPEC_VERSION.into(),
        }
    }

    /// Loss evaluated directly from the unshifted definition.
    fn direct_loss(features: &[FeatureVector], logliks: &[f64], m: &PredictiveReranker) -> f64 {
        let f: Vec<f64> = features.iter().map(|x| m.logit(x)).collect();
        let denom: f64 = f.iter().map(|v| v.exp()).sum();
        -f.iter()
            .zip(logliks)
            .map(|(v, ll)| v.exp() / denom * ll.exp())
            .sum::<f64>()
            .ln()
    }

    #[test]
    fn two_candidate_gradient_values() {
        // Features chosen so that f = (0, 0) under the zero model.
        let feats = [[0.0; 5], [0.0; 5]];
        let g = listwise_loss_and_grad(&feats, &[0.0, -1.0], &PredictiveReranker::zeros()).unwrap();
        let z = 0.5 * (1.0 + (-1.0f64).exp());
        assert!((z - 0.683_939_720_585_721_2).abs() < 1e-15);
        assert!((g.loss + z.ln()).abs() < 1e-15);

        // Central differences on the logits directly.
        let h = 1e-6;
        let loss_at = |f0: f64, f1: f64| {
            let p0 = f0.exp() / (f0.exp() + f1.exp());
            -(p0 * 1.0 + (1.0 - p0) * (-1.0f64).exp()).ln()
        };
        let fd0 = (loss_at(h, 0.0) - loss_at(-h, 0.0)) / (2.0 * h);
        let fd1 = (loss_at(0.0, h) - loss_at(0.0, -h)) / (2.0 * h);
        assert!((fd0 + 0.231_058_578_630_005).abs() < 1e-8, "{fd0}");
        assert!((g.grad_logits[0] - fd0).abs() < 1e-8);
        assert!((g.grad_logits[1] - fd1).abs() < 1e-8);
        assert!((g.grad_logits[0] + 0.231_058_578_630_005).abs() < 1e-12);
        assert!((g.grad_logits[1] - 0.231_058_578_630_005).abs() < 1e-12);
    }

    #[test]
    fn equal_logliks_give_zero_gradient() {
        let feats = [
            [0.3, 0.1, 0.0, 0.5, 0.2],
            [0.9, 0.4, 0.2, 0.1, 0.7],
            [0.0; 5],
        ];
        let m = model([0.5, -1.0, 2.0, 0.1, 0.3], 0.2);
        let g = listwise_loss_and_grad(&feats, &[-4.0, -4.0, -4.0], &m).unwrap();
        assert!(g.loss.abs() < 1e-15);
        assert!(g.grad_logits.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn singleton_list() {
        let g = listwise_loss_and_grad(&[[0.2; 5]], &[-7.5], &model([1.0; 5], 0.0)).unwrap();
        assert_eq!(g.loss, 0.0);
        assert_eq!(g.grad_logits, [0.0]);
        assert!((g.unstabilized_loss() - 7.5).abs() < 1e-15);
    }

    #[test]
    fn stabilized_loss_matches_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = rng.gen_range(1..6);
            let feats: Vec<FeatureVector> =
                (0..k).map(|_| std::array::from_fn(|_| rng.gen())).collect();
            let ll: Vec<f64> = (0..k).map(|_| rng.gen_range(-8.0..0.0)).collect();
            let m = model(
                std::array::from_fn(|_| rng.gen_range(-2.0..2.0)),
                rng.gen_range(-1.0..1.0),
            );
            let g = listwise_loss_and_grad(&feats, &ll, &m).unwrap();
            assert!((g.unstabilized_loss() - direct_loss(&feats, &ll, &m)).abs() < 1e-10);
        }
    }

    #[test]
    fn non_finite_loglik_rejected() {
        let r = listwise_loss_and_grad(
            &[[0.0; 5]],
            &[f64::NEG_INFINITY],
            &PredictiveReranker::zeros(),
        );
        assert!(matches!(r, Err(RalmError::RejectedExample(_))));
    }

    fn candidate(id: usize, text: &str) -> RerankCandidate {
        RerankCandidate {
            passage: Passage {
                passage_id: id,
                source_doc_id: "d".into(),
                title: None,
                word_span: (0, text.split_whitespace().count()),
                text: text.into(),
            },
            retriever_score: 1.0,
            rank: id,
        }
    }

    #[test]
    fn zero_model_and_single_feature_models() {
        let prefix = LmTokenizer.tokenize("red green blue yellow");
        let cands = vec![
            candidate(0, "nothing shared here"),
            candidate(1, "green blue"),
            candidate(2, "red green blue yellow"),
        ];
        assert_eq!(
            predictive_rerank(&cands, &prefix, &PredictiveReranker::zeros(), 32).unwrap(),
            0
        );
        let f1_only = model([0.0, 1.0, 0.0, 0.0, 0.0], 0.0);
        assert_eq!(predictive_rerank(&cands, &prefix, &f1_only, 32).unwrap(), 2);
        let mut wrong = f1_only.clone();
        wrong.feature_spec_version = "other".into();
        assert!(predictive_rerank(&cands, &prefix, &wrong, 32).is_err());
    }

    #[test]
    fn lr_zero_and_flat_examples_keep_zero_weights() {
        let ex = RerankExample {
            prefix_text: "a b c".into(),
            candidates: vec![candidate(0, "a b"), candidate(1, "c d")],
            lm_logliks: vec![-2.0, -2.0],
            y_text: "d".into(),
        };
        let out = train(
            std::slice::from_ref(&ex),
            &TrainConfig {
                steps: 50,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert!(out.model.weights.iter().all(|&w| w == 0.0));

        let mut skewed = ex.clone();
        skewed.lm_logliks = vec![-1.0, -3.0];
        let out = train(
            &[skewed],
            &TrainConfig {
                lr: 0.0,
                steps: 20,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.model, PredictiveReranker::zeros());
        assert!(out.loss_trajectory.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(out.loss_trajectory.len(), 21);
        assert!(train(&[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn divergence_detected() {
        let ex = RerankExample {
            prefix_text: "a b c".into(),
            candidates: vec![candidate(0, "a b c"), candidate(1, "x y")],
            lm_logliks: vec![-1.0, -3.0],
            y_text: "d".into(),
        };
        // Gradient ascent via a negative rate raises the loss every step.
        let r = train(
            &[ex],
            &TrainConfig {
                lr: -1.0,
                steps: 100,
                ..TrainConfig::default()
            },
        );
        assert!(matches!(r, Err(RalmError::Divergence { .. })));
    }

    #[test]
    fn model_file_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let m = model([0.1, 0.2, 0.3, 0.4, 0.5], -0.5);
        m.save(&path).unwrap();
        assert_eq!(PredictiveReranker::load(&path).unwrap(), m);
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace(FEATURE_SPEC_VERSION, "lexical-v0");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            PredictiveReranker::load(&path),
            Err(RalmError::FeatureSpecMismatch { .. })
        ));
    }
}
