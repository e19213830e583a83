use crate::error::Result;
use crate::text::detokenize;

/// A model exposing full next-token distributions, enough to decode.
pub trait NextTokenModel {
    fn window(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<u32>;
    fn token_text(&self, id: u32) -> &str;
    fn next_token_distribution(&self, history: &[u32]) -> Vec<f64>;

    /// Tokens without a surface form (UNK) are never emitted.
    fn is_generable(&self, _id: u32) -> bool {
        true
    }
}

/// Greedy decoding: append the most probable token (lowest id on ties) until
/// the decoded text contains `stop` or `max_new_tokens` is spent. The
/// returned text ends before the stop sequence.
///
/// When prompt plus output would exceed the window, the oldest prompt
/// tokens are dropped and decoding continues.
pub fn generate_greedy<M: NextTokenModel + ?Sized>(
    model: &M,
    prompt: &str,
    max_new_tokens: usize,
    stop: &str,
) -> Result<String> {
    let mut history = model.encode(prompt);
    let mut generated: Vec<&str> = Vec::new();
    let budget = model.window().saturating_sub(1).max(1);

    for _ in 0..max_new_tokens {
        if history.len() > budget {
            history.drain(..history.len() - budget);
        }
        let dist = model.next_token_distribution(&history);
        let mut best: Option<(u32, f64)> = None;
        for (id, &p) in dist.iter().enumerate() {
            let id = id as u32;
            if !model.is_generable(id) {
                continue;
            }
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((id, p));
            }
        }
        let Some((next, _)) = best else { break };
        history.push(next);
        generated.push(model.token_text(next));

        let text = detokenize(&generated);
        if !stop.is_empty() {
            if let Some(pos) = text.find(stop) {
                return Ok(text[..pos].trim_end().to_string());
            }
        }
    }
    Ok(detokenize(&generated))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three-token vocabulary with a fixed next-token distribution.
    struct Fixed {
        tokens: [&'static str; 3],
        dist: Vec<f64>,
        window: usize,
    }

    impl NextTokenModel for Fixed {
        fn window(&self) -> usize {
            self.window
        }
        fn encode(&self, text: &str) -> Vec<u32> {
            text.split_whitespace().map(|_| 0).collect()
        }
        fn token_text(&self, id: u32) -> &str {
            self.tokens[id as usize]
        }
        fn next_token_distribution(&self, _history: &[u32]) -> Vec<f64> {
            self.dist.clone()
        }
    }

    #[test]
    fn degenerate_distribution_repeats_token() {
        let m = Fixed {
            tokens: ["x", "q", "\n"],
            dist: vec![0.0, 1.0, 0.0],
            window: 8,
        };
        assert_eq!(generate_greedy(&m, "a b", 3, "\n").unwrap(), "q q q");
    }

    #[test]
    fn stop_on_first_token() {
        let m = Fixed {
            tokens: ["x", "q", "\n"],
            dist: vec![0.0, 0.0, 1.0],
            window: 8,
        };
        assert_eq!(generate_greedy(&m, "a", 5, "\n").unwrap(), "");
    }

    #[test]
    fn zero_budget() {
        let m = Fixed {
            tokens: ["x", "q", "\n"],
            dist: vec![0.0, 1.0, 0.0],
            window: 8,
        };
        assert_eq!(generate_greedy(&m, "a", 0, "\n").unwrap(), "");
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let m = Fixed {
            tokens: ["x", "q", "\n"],
            dist: vec![0.5, 0.5, 0.0],
            window: 8,
        };
        assert_eq!(generate_greedy(&m, "", 2, "\n").unwrap(), "x x");
    }

    #[test]
    fn long_prompt_is_truncated_not_rejected() {
        let m = Fixed {
            tokens: ["x", "q", "\n"],
            dist: vec![0.0, 1.0, 0.0],
            window: 2,
        };
        assert_eq!(
            generate_greedy(&m, "a b c d e", 4, "\n").unwrap(),
            "q q q q"
        );
    }
}
