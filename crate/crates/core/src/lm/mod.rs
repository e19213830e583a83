//! Language-model backends behind one scoring interface.
//!
//! All log-probabilities are natural logs. Backends never truncate input on
//! `score`; an over-long request is an error. Window management belongs to
//! the engine.

mod greedy;
mod ngram;
pub(crate) mod remote;

use serde::{Deserialize, Serialize};

use crate::error::{RalmError, Result};

pub use greedy::{generate_greedy, NextTokenModel};
pub use ngram::{CacheNGramLm, NGramConfig, UNK_TOKEN};
pub use remote::{RemoteLm, DEFAULT_HTTP_TIMEOUT_MS, HTTP_TIMEOUT_ENV};

/// Window size of the built-in model.
pub const DEFAULT_MAX_CONTEXT_TOKENS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmInfo {
    pub name: String,
    pub max_context_tokens: usize,
}

impl LmInfo {
    pub fn validate(self) -> Result<Self> {
        if self.max_context_tokens < 2 {
            return Err(RalmError::Backend(format!(
                "backend {:?} reports max_context_tokens = {}, need at least 2",
                self.name, self.max_context_tokens
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmScoreRequest {
    pub context: String,
    pub continuation: String,
}

impl LmScoreRequest {
    pub fn new(context: impl Into<String>, continuation: impl Into<String>) -> Self {
        LmScoreRequest {
            context: context.into(),
            continuation: continuation.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmScoreResult {
    pub token_count: usize,
    pub per_token_logprobs: Vec<f64>,
    pub logprob_sum: f64,
}

impl LmScoreResult {
    pub fn from_logprobs(per_token_logprobs: Vec<f64>) -> Self {
        LmScoreResult {
            token_count: per_token_logprobs.len(),
            logprob_sum: per_token_logprobs.iter().sum(),
            per_token_logprobs,
        }
    }

    /// Checks the structural invariants of a result received from elsewhere.
    pub fn validate(&self) -> Result<()> {
        if self.token_count != self.per_token_logprobs.len() {
            return Err(RalmError::Backend(format!(
                "token_count {} disagrees with {} logprobs",
                self.token_count,
                self.per_token_logprobs.len()
            )));
        }
        if self.token_count == 0 {
            return Err(RalmError::Backend("score result has no tokens".into()));
        }
        if !self.logprob_sum.is_finite() || self.per_token_logprobs.iter().any(|l| !l.is_finite()) {
            return Err(RalmError::Backend("non-finite log-probability".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_new_tokens: usize,
    pub stop: String,
}

/// A scoring language model: the generator, or the reranking model.
pub trait LmBackend: Send + Sync {
    fn info(&self) -> Result<LmInfo>;

    /// Log-probabilities of each continuation token given the context and
    /// the preceding continuation tokens.
    fn score(&self, req: &LmScoreRequest) -> Result<LmScoreResult>;

    /// Greedy continuation of `prompt`, cut before the first `stop`.
    fn generate(&self, req: &GenerateRequest) -> Result<String>;
}

impl<T: LmBackend + ?Sized> LmBackend for &T {
    fn info(&self) -> Result<LmInfo> {
        (**self).info()
    }
    fn score(&self, req: &LmScoreRequest) -> Result<LmScoreResult> {
        (**self).score(req)
    }
    fn generate(&self, req: &GenerateRequest) -> Result<String> {
        (**self).generate(req)
    }
}

impl<T: LmBackend + ?Sized> LmBackend for std::sync::Arc<T> {
    fn info(&self) -> Result<LmInfo> {
        (**self).info()
    }
    fn score(&self, req: &LmScoreRequest) -> Result<LmScoreResult> {
        (**self).score(req)
    }
    fn generate(&self, req: &GenerateRequest) -> Result<String> {
        (**self).generate(req)
    }
}

/// A backend chosen at run time.
pub enum Backend {
    Builtin(CacheNGramLm),
    Remote(RemoteLm),
}

impl LmBackend for Backend {
    fn info(&self) -> Result<LmInfo> {
        match self {
            Backend::Builtin(m) => m.info(),
            Backend::Remote(r) => r.info(),
        }
    }
    fn score(&self, req: &LmScoreRequest) -> Result<LmScoreResult> {
        match self {
            Backend::Builtin(m) => m.score(req),
            Backend::Remote(r) => r.score(req),
        }
    }
    fn generate(&self, req: &GenerateRequest) -> Result<String> {
        match self {
            Backend::Builtin(m) => m.generate(req),
            Backend::Remote(r) => r.generate(req),
        }
    }
}
