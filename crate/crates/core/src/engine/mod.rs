//! The retrieval-augmented evaluation loop.
//!
//! The text is split into strides of `s` tokens. Before each stride the
//! engine retrieves with the last `ℓ` prefix tokens, picks one candidate
//! according to the rerank mode, prepends it to the prefix and scores the
//! stride's tokens in a single call.

mod context;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::bm25::InvertedIndex;
use crate::corpus::PassageSet;
use crate::error::{RalmError, Result};
use crate::lm::{LmBackend, LmScoreRequest};
use crate::rerank::{
    argmax_first, candidate_logliks, predictive_rerank, zero_shot_rerank, PredictiveReranker,
    RerankCandidate,
};
use crate::text::{detokenize, whitespace_words, LmTokenizer};

pub use context::{
    assemble_input, build_query, AssembledInput, PASSAGE_SEPARATOR, SEPARATOR_TOKENS,
};
pub use sweep::{sweep, sweep_to_csv, SweepAxis, SweepRow, SWEEP_CSV_HEADER};

pub const DEFAULT_STRIDE: usize = 4;
pub const DEFAULT_QUERY_LEN: usize = 32;
pub const DEFAULT_TOP_K: usize = 16;
pub const DEFAULT_RERANK_WINDOW: usize = 16;
pub const DEFAULT_MAX_PASSAGE_TOKENS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RerankMode {
    /// Use the retriever's top result.
    None,
    /// Pick the candidate under which a reranking LM best predicts the last
    /// `rerank_window` prefix tokens.
    ZeroShot,
    /// Pick the candidate a trained scorer rates highest.
    Predictive,
    /// Pick the candidate that best predicts the true upcoming tokens.
    /// Evaluation only.
    Oracle,
}

impl std::str::FromStr for RerankMode {
    type Err = RalmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RerankMode::None),
            "zero-shot" | "zero_shot" => Ok(RerankMode::ZeroShot),
            "predictive" => Ok(RerankMode::Predictive),
            "oracle" => Ok(RerankMode::Oracle),
            other => Err(RalmError::InvalidArgument(format!(
                "unknown rerank mode {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RalmConfig {
    pub stride: usize,
    pub query_len: usize,
    pub top_k: usize,
    pub rerank_mode: RerankMode,
    pub rerank_window: usize,
    pub max_passage_tokens: usize,
    pub retrieval_enabled: bool,
}

impl Default for RalmConfig {
    fn default() -> Self {
        RalmConfig {
            stride: DEFAULT_STRIDE,
            query_len: DEFAULT_QUERY_LEN,
            top_k: DEFAULT_TOP_K,
            rerank_mode: RerankMode::None,
            rerank_window: DEFAULT_RERANK_WINDOW,
            max_passage_tokens: DEFAULT_MAX_PASSAGE_TOKENS,
            retrieval_enabled: true,
        }
    }
}

impl RalmConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("stride", self.stride),
            ("query_len", self.query_len),
            ("top_k", self.top_k),
            ("rerank_window", self.rerank_window),
        ] {
            if v == 0 {
                return Err(RalmError::InvalidArgument(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        Ok(())
    }
}

/// Passage lookup on top of an index.
#[derive(Clone, Copy)]
pub struct Retriever<'a> {
    index: &'a InvertedIndex,
    passages: &'a PassageSet,
}

impl<'a> Retriever<'a> {
    /// Fails when the index was not built from `passages`.
    pub fn new(index: &'a InvertedIndex, passages: &'a PassageSet) -> Result<Self> {
        index.check_corpus(passages)?;
        Ok(Retriever { index, passages })
    }

    pub fn index(&self) -> &'a InvertedIndex {
        self.index
    }

    pub fn passages(&self) -> &'a PassageSet {
        self.passages
    }

    pub fn candidates(&self, query: &str, k: usize) -> Vec<RerankCandidate> {
        self.index
            .search(query, k)
            .into_iter()
            .enumerate()
            .map(|(rank, r)| RerankCandidate {
                passage: self.passages.passages()[r.passage_id].clone(),
                retriever_score: r.score,
                rank,
            })
            .collect()
    }
}

/// Optional models used by the rerank modes.
#[derive(Clone, Copy, Default)]
pub struct Rerankers<'a> {
    /// Zero-shot reranking LM; the generator is used when absent.
    pub zero_shot: Option<&'a dyn LmBackend>,
    pub predictive: Option<&'a PredictiveReranker>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideRecord {
    pub stride_index: usize,
    pub query_text: String,
    pub candidate_ids: Vec<usize>,
    pub chosen_passage_id: Option<usize>,
    pub nll_sum: f64,
    pub token_count: usize,
    pub dropped_prefix: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub total_nll: f64,
    pub token_count: usize,
    pub word_count: usize,
    pub token_ppl: f64,
    pub word_ppl: f64,
    pub strides: Vec<StrideRecord>,
}

/// Picks the candidate under which `generator` assigns the highest
/// likelihood to the true upcoming tokens. Ties go to the lower rank.
pub fn oracle_select<S: AsRef<str>>(
    candidates: &[RerankCandidate],
    prefix_tokens: &[S],
    y_tokens: &[S],
    generator: &dyn LmBackend,
    max_passage_tokens: usize,
) -> Result<usize> {
    if candidates.len() <= 1 {
        return Ok(0);
    }
    let window = generator.info()?.max_context_tokens;
    let scores = candidate_logliks(
        candidates,
        prefix_tokens,
        y_tokens,
        generator,
        window,
        max_passage_tokens,
    )
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(argmax_first(&scores))
}

/// Stride-scheduled retrieval-augmented perplexity of `text`.
pub fn evaluate_perplexity(
    text: &str,
    retriever: Option<Retriever<'_>>,
    generator: &dyn LmBackend,
    cfg: &RalmConfig,
    rerankers: Rerankers<'_>,
) -> Result<PerplexityReport> {
    cfg.validate()?;
    let tokens = LmTokenizer.tokenize(text);
    let word_count = whitespace_words(text).len();
    if tokens.is_empty() || word_count == 0 {
        return Err(RalmError::InvalidArgument(
            "text to evaluate has no tokens".into(),
        ));
    }
    let window = generator.info()?.max_context_tokens;
    if cfg.stride > window {
        return Err(RalmError::InvalidArgument(format!(
            "stride {} exceeds the generator window {window}",
            cfg.stride
        )));
    }
    let zero_shot_backend = rerankers.zero_shot.unwrap_or(generator);
    if cfg.rerank_mode == RerankMode::Predictive && rerankers.predictive.is_none() {
        return Err(RalmError::InvalidArgument(
            "predictive reranking requires a trained model".into(),
        ));
    }

    let num_strides = tokens.len().div_ceil(cfg.stride);
    let mut strides = Vec::with_capacity(num_strides);
    let mut total_nll = 0.0;
    let mut token_count = 0;

    for j in 0..num_strides {
        let start = j * cfg.stride;
        let end = (start + cfg.stride).min(tokens.len());
        let prefix = &tokens[..start];
        let target = &tokens[start..end];

        let query_text = match retriever {
            Some(_) if cfg.retrieval_enabled => build_query(&tokens, j, cfg.stride, cfg.query_len),
            _ => String::new(),
        };
        let candidates = match retriever {
            Some(r) if !query_text.is_empty() => r.candidates(&query_text, cfg.top_k),
            _ => Vec::new(),
        };
        let chosen = if candidates.is_empty() {
            None
        } else {
            let idx = match cfg.rerank_mode {
                RerankMode::None => 0,
                RerankMode::Oracle => oracle_select(
                    &candidates,
                    prefix,
                    target,
                    generator,
                    cfg.max_passage_tokens,
                )
                .map_err(|e| RalmError::at_stride(j, e))?,
                RerankMode::ZeroShot => zero_shot_rerank(
                    &candidates,
                    prefix,
                    cfg.rerank_window,
                    zero_shot_backend,
                    cfg.max_passage_tokens,
                ),
                RerankMode::Predictive => predictive_rerank(
                    &candidates,
                    prefix,
                    rerankers.predictive.expect("checked above"),
                    cfg.query_len,
                )?,
            };
            Some(&candidates[idx])
        };

        let passage_text = chosen.map_or("", |c| c.passage.text.as_str());
        let input = assemble_input(
            passage_text,
            prefix,
            target.len(),
            window,
            cfg.max_passage_tokens,
        )
        .map_err(|e| RalmError::at_stride(j, e))?;
        let continuation = detokenize(target);
        assert!(
            LmTokenizer.count(&input.context) + target.len() <= window,
            "assembled input exceeds the generator window at stride {j}"
        );
        let scored = generator
            .score(&LmScoreRequest::new(input.context, continuation))
            .map_err(|e| RalmError::at_stride(j, e))?;

        let nll_sum = -scored.logprob_sum;
        total_nll += nll_sum;
        token_count += scored.token_count;
        strides.push(StrideRecord {
            stride_index: j,
            query_text,
            candidate_ids: candidates.iter().map(|c| c.passage.passage_id).collect(),
            chosen_passage_id: chosen.map(|c| c.passage.passage_id),
            nll_sum,
            token_count: scored.token_count,
            dropped_prefix: input.dropped_prefix,
        });
    }

    Ok(PerplexityReport {
        total_nll,
        token_count,
        word_count,
        token_ppl: (total_nll / token_count as f64).exp(),
        word_ppl: (total_nll / word_count as f64).exp(),
        strides,
    })
}
