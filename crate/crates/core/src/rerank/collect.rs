use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::predictive::RerankExample;
use super::zero_shot::candidate_logliks;
use crate::engine::{build_query, RalmConfig, Retriever};
use crate::error::{RalmError, Result};
use crate::lm::LmBackend;
use crate::text::{detokenize, LmTokenizer};

const EXAMPLE_SET_VERSION: u32 = 1;
const ATTEMPTS_PER_EXAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub num_examples: usize,
    pub seed: u64,
}

/// Samples stride boundaries `j >= 1` uniformly (with replacement), retrieves
/// the top-k candidates with the usual query, and records the generator's
/// likelihood of the next `stride` tokens under each candidate.
///
/// Boundaries whose query retrieves nothing are skipped and resampled.
pub fn collect_training_examples(
    corpus_text: &str,
    retriever: Retriever<'_>,
    generator: &dyn LmBackend,
    cfg: &RalmConfig,
    collect: CollectConfig,
) -> Result<Vec<RerankExample>> {
    cfg.validate()?;
    if collect.num_examples == 0 {
        return Ok(Vec::new());
    }
    let tokens = LmTokenizer.tokenize(corpus_text);
    let s = cfg.stride;
    let last_boundary = tokens.len().saturating_sub(s) / s;
    if last_boundary == 0 {
        return Err(RalmError::InvalidArgument(format!(
            "text of {} tokens has no stride boundary followed by {s} tokens",
            tokens.len()
        )));
    }
    let window = generator.info()?.max_context_tokens;
    let mut rng = ChaCha8Rng::seed_from_u64(collect.seed);
    let mut examples = Vec::with_capacity(collect.num_examples);
    let max_attempts = collect.num_examples * ATTEMPTS_PER_EXAMPLE;

    for _ in 0..max_attempts {
        if examples.len() == collect.num_examples {
            break;
        }
        let j = rng.gen_range(1..=last_boundary);
        let query = build_query(&tokens, j, s, cfg.query_len);
        let candidates = retriever.candidates(&query, cfg.top_k);
        if candidates.is_empty() {
            continue;
        }
        let prefix = &tokens[..s * j];
        let y = &tokens[s * j..s * j + s];
        let lm_logliks = candidate_logliks(
            &candidates,
            prefix,
            y,
            generator,
            window,
            cfg.max_passage_tokens,
        )
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let kept = &prefix[prefix.len().saturating_sub(window)..];
        examples.push(RerankExample {
            prefix_text: detokenize(kept),
            candidates,
            lm_logliks,
            y_text: detokenize(y),
        });
    }
    if examples.len() < collect.num_examples {
        return Err(RalmError::InvalidArgument(format!(
            "collected only {} of {} examples; queries rarely match the index",
            examples.len(),
            collect.num_examples
        )));
    }
    Ok(examples)
}

#[derive(Serialize, Deserialize)]
struct ExampleSet {
    format_version: u32,
    examples: Vec<RerankExample>,
}

pub fn save_examples(examples: &[RerankExample], path: &Path) -> Result<()> {
    let set = ExampleSet {
        format_version: EXAMPLE_SET_VERSION,
        examples: examples.to_vec(),
    };
    let bytes = serde_json::to_vec(&set).map_err(|e| RalmError::Corruption(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| RalmError::io(path, e))
}

pub fn load_examples(path: &Path) -> Result<Vec<RerankExample>> {
    let bytes = fs::read(path).map_err(|e| RalmError::io(path, e))?;
    let set: ExampleSet = serde_json::from_slice(&bytes)
        .map_err(|e| RalmError::Corruption(format!("example set: {e}")))?;
    if set.format_version != EXAMPLE_SET_VERSION {
        return Err(RalmError::Corruption(format!(
            "unsupported example set version {}",
            set.format_version
        )));
    }
    Ok(set.examples)
}
