use super::{argmax_first, RerankCandidate};
use crate::engine::assemble_input;
use crate::error::Result;
use crate::lm::{LmBackend, LmScoreRequest};
use crate::text::detokenize;

/// `ln p(target | [passage_i; prefix])` for every candidate, in rank order.
pub fn candidate_logliks<S: AsRef<str>>(
    candidates: &[RerankCandidate],
    prefix_tokens: &[S],
    target_tokens: &[S],
    backend: &dyn LmBackend,
    window: usize,
    max_passage_tokens: usize,
) -> Vec<Result<f64>> {
    let continuation = detokenize(target_tokens);
    candidates
        .iter()
        .map(|c| {
            let input = assemble_input(
                &c.passage.text,
                prefix_tokens,
                target_tokens.len(),
                window,
                max_passage_tokens,
            )?;
            let r = backend.score(&LmScoreRequest::new(input.context, continuation.clone()))?;
            Ok(r.logprob_sum)
        })
        .collect()
}

/// Splits the prefix into `x` and its last `rerank_window` tokens `y'`, and
/// returns the candidate maximizing `p(y' | [d_i; x])` under `backend`.
///
/// Any backend failure falls back to rank 0 with a warning.
pub fn zero_shot_rerank<S: AsRef<str>>(
    candidates: &[RerankCandidate],
    prefix_tokens: &[S],
    rerank_window: usize,
    backend: &dyn LmBackend,
    max_passage_tokens: usize,
) -> usize {
    if candidates.len() <= 1 {
        return 0;
    }
    let tail = rerank_window.min(prefix_tokens.len());
    if tail == 0 {
        return 0;
    }
    let split = prefix_tokens.len() - tail;
    let window = match backend.info() {
        Ok(info) => info.max_context_tokens,
        Err(e) => {
            log::warn!("zero-shot rerank: backend info failed ({e}); using rank 0");
            return 0;
        }
    };
    let scored: Result<Vec<f64>> = candidate_logliks(
        candidates,
        &prefix_tokens[..split],
        &prefix_tokens[split..],
        backend,
        window,
        max_passage_tokens,
    )
    .into_iter()
    .collect();
    match scored {
        Ok(scores) => argmax_first(&scores),
        Err(e) => {
            log::warn!("zero-shot rerank: scoring failed ({e}); using rank 0");
            0
        }
    }
}
