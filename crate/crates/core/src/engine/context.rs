use crate::error::{RalmError, Result};
use crate::text::{detokenize, LmTokenizer};

/// Separator between a prepended passage and the prefix.
pub const PASSAGE_SEPARATOR: &str = "\n\n";
/// Window budget charged for [`PASSAGE_SEPARATOR`].
pub const SEPARATOR_TOKENS: usize = 1;

/// Retrieval query for stride `j`: the last `min(query_len, stride·j)`
/// tokens of the prefix `x_{≤ stride·j}`, joined by single spaces. A prefix
/// end beyond the sequence is clamped to its length.
pub fn build_query<S: AsRef<str>>(
    tokens: &[S],
    j: usize,
    stride: usize,
    query_len: usize,
) -> String {
    let end = stride.saturating_mul(j).min(tokens.len());
    let start = end.saturating_sub(query_len);
    detokenize(&tokens[start..end])
}

/// Model input ready for one score call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledInput {
    pub context: String,
    /// Prefix tokens removed from the left to fit the window.
    pub dropped_prefix: usize,
    /// Tokens charged against the window, separator included.
    pub context_budget: usize,
    /// Passage tokens kept after the cap.
    pub passage_tokens: usize,
}

/// Builds `[passage; "\n\n"; prefix]`, capping the passage at
/// `max_passage_tokens` and dropping the oldest prefix tokens until passage,
/// separator, remaining prefix and `continuation_tokens` fit `max_context`.
/// An empty passage yields the (left-truncated) prefix alone.
pub fn assemble_input<S: AsRef<str>>(
    passage_text: &str,
    prefix_tokens: &[S],
    continuation_tokens: usize,
    max_context: usize,
    max_passage_tokens: usize,
) -> Result<AssembledInput> {
    if continuation_tokens == 0 {
        return Err(RalmError::InvalidArgument(
            "continuation must have at least one token".into(),
        ));
    }
    let mut passage = LmTokenizer.tokenize(passage_text);
    passage.truncate(max_passage_tokens);

    let fixed = if passage.is_empty() {
        continuation_tokens
    } else {
        passage.len() + SEPARATOR_TOKENS + continuation_tokens
    };
    if fixed > max_context {
        return Err(if passage.is_empty() {
            RalmError::ContextOverflow {
                needed: continuation_tokens,
                window: max_context,
            }
        } else {
            RalmError::PassageTooLong {
                passage_tokens: passage.len(),
                continuation_tokens,
                window: max_context,
            }
        });
    }
    let keep = prefix_tokens.len().min(max_context - fixed);
    let dropped_prefix = prefix_tokens.len() - keep;
    let prefix = detokenize(&prefix_tokens[dropped_prefix..]);

    let (context, context_budget) = if passage.is_empty() {
        (prefix, keep)
    } else {
        let mut ctx = detokenize(&passage);
        ctx.push_str(PASSAGE_SEPARATOR);
        ctx.push_str(&prefix);
        (ctx, passage.len() + SEPARATOR_TOKENS + keep)
    };
    Ok(AssembledInput {
        context,
        dropped_prefix,
        context_budget,
        passage_tokens: passage.len(),
    })
}
