//! Built-in interpolated n-gram LM with a whole-context cache component.
//!
//! ```text
//! p_ngram(w | h) = Σ_m η_m · (c(h_{m-1} w) + α) / (c(h_{m-1}) + α·V)
//! p_cache(w | h) = (occ_h(w) + γ) / (|h| + γ·V)
//! p(w | h)       = (1 − λ)·p_ngram(w | h) + λ·p_cache(w | h)
//! ```
//!
//! `h_{m-1}` is the last `m − 1` tokens of the history, or the whole
//! history when it is shorter. `c(h)` for a history is the number of
//! n-grams it prefixes, so each component is a proper distribution over
//! the `V` vocabulary entries (including UNK).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::greedy::{generate_greedy, NextTokenModel};
use super::{
    GenerateRequest, LmBackend, LmInfo, LmScoreRequest, LmScoreResult, DEFAULT_MAX_CONTEXT_TOKENS,
};
use crate::error::{RalmError, Result};
use crate::text::LmTokenizer;

pub const UNK_TOKEN: &str = "<unk>";
const UNK_ID: u32 = 0;
const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramConfig {
    pub order: usize,
    pub alpha: f64,
    /// Order interpolation weights `η_1..η_n`; uniform when absent.
    pub weights: Option<Vec<f64>>,
    /// Cache weight; 1 gives a pure cache model.
    pub cache_lambda: f64,
    pub cache_gamma: f64,
    pub max_context_tokens: usize,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            order: 3,
            alpha: 0.1,
            weights: None,
            cache_lambda: 0.3,
            cache_gamma: 1.0,
            max_context_tokens: DEFAULT_MAX_CONTEXT_TOKENS,
        }
    }
}

impl NGramConfig {
    fn resolved_weights(&self) -> Result<Vec<f64>> {
        if self.order == 0 {
            return Err(RalmError::InvalidArgument(
                "n-gram order must be >= 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(RalmError::InvalidArgument("alpha must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.cache_lambda) {
            return Err(RalmError::InvalidArgument(
                "lambda must lie in [0, 1]".into(),
            ));
        }
        if !(self.cache_gamma > 0.0 && self.cache_gamma.is_finite()) {
            return Err(RalmError::InvalidArgument("gamma must be > 0".into()));
        }
        if self.max_context_tokens < 2 {
            return Err(RalmError::InvalidArgument(
                "max_context_tokens must be >= 2".into(),
            ));
        }
        let weights = match &self.weights {
            None => vec![1.0 / self.order as f64; self.order],
            Some(w) => w.clone(),
        };
        let total: f64 = weights.iter().sum();
        if weights.len() != self.order
            || weights.iter().any(|&w| w < 0.0)
            || (total - 1.0).abs() > 1e-9
        {
            return Err(RalmError::InvalidArgument(format!(
                "need {} nonnegative order weights summing to 1, got {:?}",
                self.order, weights
            )));
        }
        Ok(weights)
    }
}

#[derive(Debug, Clone)]
pub struct CacheNGramLm {
    name: String,
    config: NGramConfig,
    weights: Vec<f64>,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// n-gram counts for every order 1..=n.
    ngram_counts: HashMap<Vec<u32>, u64>,
    /// Σ_w c(h w) for every history of length 0..n-1 that occurs.
    history_counts: HashMap<Vec<u32>, u64>,
}

impl CacheNGramLm {
    /// Counts n-grams of every order over the tokenized corpus.
    pub fn train(corpus_text: &str, config: NGramConfig) -> Result<Self> {
        let tokens = LmTokenizer.tokenize(corpus_text);
        if tokens.is_empty() {
            return Err(RalmError::InvalidArgument(
                "training text has no tokens".into(),
            ));
        }
        let mut vocab_words: Vec<&String> = tokens.iter().collect();
        vocab_words.sort();
        vocab_words.dedup();
        let vocab: Vec<String> = std::iter::once(UNK_TOKEN.to_string())
            .chain(vocab_words.into_iter().filter(|w| *w != UNK_TOKEN).cloned())
            .collect();
        let mut model = CacheNGramLm::untrained(vocab, config)?;
        let ids = model.encode_tokens(&tokens);
        for m in 1..=model.config.order {
            for gram in ids.windows(m) {
                *model.ngram_counts.entry(gram.to_vec()).or_default() += 1;
                *model
                    .history_counts
                    .entry(gram[..m - 1].to_vec())
                    .or_default() += 1;
            }
        }
        Ok(model)
    }

    /// A model over `vocab` with all counts zero. UNK is prepended when
    /// missing.
    pub fn untrained(mut vocab: Vec<String>, config: NGramConfig) -> Result<Self> {
        let weights = config.resolved_weights()?;
        if vocab.first().map(String::as_str) != Some(UNK_TOKEN) {
            vocab.retain(|w| w != UNK_TOKEN);
            vocab.insert(0, UNK_TOKEN.to_string());
        }
        let mut ids = HashMap::with_capacity(vocab.len());
        for (i, w) in vocab.iter().enumerate() {
            if ids.insert(w.clone(), i as u32).is_some() {
                return Err(RalmError::InvalidArgument(format!(
                    "duplicate vocabulary entry {w:?}"
                )));
            }
        }
        Ok(CacheNGramLm {
            name: format!("builtin-cache-{}gram", config.order),
            config,
            weights,
            vocab,
            ids,
            ngram_counts: HashMap::new(),
            history_counts: HashMap::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.token_id(t.as_ref())).collect()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.encode_tokens(&LmTokenizer.tokenize(text))
    }

    pub fn ngram_probability(&self, history: &[u32], w: u32) -> f64 {
        let v = self.vocab.len() as f64;
        let alpha = self.config.alpha;
        let mut key = Vec::with_capacity(self.config.order);
        let mut p = 0.0;
        for (m_idx, &eta) in self.weights.iter().enumerate() {
            let h_len = m_idx.min(history.len());
            let h = &history[history.len() - h_len..];
            let denom = self.history_counts.get(h).copied().unwrap_or(0) as f64;
            key.clear();
            key.extend_from_slice(h);
            key.push(w);
            let num = self.ngram_counts.get(key.as_slice()).copied().unwrap_or(0) as f64;
            p += eta * (num + alpha) / (denom + alpha * v);
        }
        p
    }

    fn cache_probability(&self, occurrences: u64, history_len: usize) -> f64 {
        let v = self.vocab.len() as f64;
        let gamma = self.config.cache_gamma;
        (occurrences as f64 + gamma) / (history_len as f64 + gamma * v)
    }

    /// Full model probability of `w` after `history`.
    pub fn probability(&self, history: &[u32], w: u32) -> f64 {
        let occ = history.iter().filter(|&&t| t == w).count() as u64;
        self.mix(history, w, occ)
    }

    fn mix(&self, history: &[u32], w: u32, occ: u64) -> f64 {
        let lambda = self.config.cache_lambda;
        let ngram = if lambda < 1.0 {
            self.ngram_probability(history, w)
        } else {
            0.0
        };
        (1.0 - lambda) * ngram + lambda * self.cache_probability(occ, history.len())
    }

    /// Distribution over the whole vocabulary after `history`.
    pub fn distribution(&self, history: &[u32]) -> Vec<f64> {
        let mut occ = vec![0u64; self.vocab.len()];
        for &t in history {
            occ[t as usize] += 1;
        }
        (0..self.vocab.len() as u32)
            .map(|w| self.mix(history, w, occ[w as usize]))
            .collect()
    }

    /// Per-token natural-log probabilities of `continuation` after `context`.
    pub fn score_ids(&self, context: &[u32], continuation: &[u32]) -> Vec<f64> {
        let mut occ: HashMap<u32, u64> = HashMap::new();
        for &t in context {
            *occ.entry(t).or_default() += 1;
        }
        let mut history: Vec<u32> = Vec::with_capacity(context.len() + continuation.len());
        history.extend_from_slice(context);
        let mut out = Vec::with_capacity(continuation.len());
        for &w in continuation {
            let count = occ.get(&w).copied().unwrap_or(0);
            out.push(self.mix(&history, w, count).ln());
            history.push(w);
            *occ.entry(w).or_default() += 1;
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ngrams: Vec<(Vec<u32>, u64)> = self
            .ngram_counts
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        ngrams.sort();
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            name: self.name.clone(),
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            ngrams,
        };
        let bytes = serde_json::to_vec(&file).map_err(|e| RalmError::Corruption(e.to_string()))?;
        fs::write(path, bytes).map_err(|e| RalmError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| RalmError::io(path, e))?;
        let file: ModelFile = serde_json::from_slice(&bytes)
            .map_err(|e| RalmError::Corruption(format!("model file: {e}")))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(RalmError::Corruption(format!(
                "unsupported model version {}",
                file.format_version
            )));
        }
        let mut model = CacheNGramLm::untrained(file.vocab, file.config)?.with_name(file.name);
        let v = model.vocab.len() as u32;
        for (gram, count) in file.ngrams {
            if gram.is_empty() || gram.len() > model.config.order || gram.iter().any(|&t| t >= v) {
                return Err(RalmError::Corruption(
                    "model file: n-gram out of range".into(),
                ));
            }
            *model
                .history_counts
                .entry(gram[..gram.len() - 1].to_vec())
                .or_default() += count;
            model.ngram_counts.insert(gram, count);
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    name: String,
    config: NGramConfig,
    vocab: Vec<String>,
    ngrams: Vec<(Vec<u32>, u64)>,
}

impl NextTokenModel for CacheNGramLm {
    fn window(&self) -> usize {
        self.config.max_context_tokens
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        CacheNGramLm::encode(self, text)
    }

    fn token_text(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    fn next_token_distribution(&self, history: &[u32]) -> Vec<f64> {
        self.distribution(history)
    }

    fn is_generable(&self, id: u32) -> bool {
        id != UNK_ID
    }
}

impl LmBackend for CacheNGramLm {
    fn info(&self) -> Result<LmInfo> {
        LmInfo {
            name: self.name.clone(),
            max_context_tokens: self.config.max_context_tokens,
        }
        .validate()
    }

    fn score(&self, req: &LmScoreRequest) -> Result<LmScoreResult> {
        let context = self.encode(&req.context);
        let continuation = self.encode(&req.continuation);
        if continuation.is_empty() {
            return Err(RalmError::InvalidArgument(
                "continuation must contain at least one token".into(),
            ));
        }
        let needed = context.len() + continuation.len();
        if needed > self.config.max_context_tokens {
            return Err(RalmError::ContextOverflow {
                needed,
                window: self.config.max_context_tokens,
            });
        }
        Ok(LmScoreResult::from_logprobs(
            self.score_ids(&context, &continuation),
        ))
    }

    fn generate(&self, req: &GenerateRequest) -> Result<String> {
        generate_greedy(self, &req.prompt, req.max_new_tokens, &req.stop)
    }
}
