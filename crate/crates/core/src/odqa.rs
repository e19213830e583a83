//! Closed-book and open-book question answering with exact-match scoring.

use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::Retriever;
use crate::error::{RalmError, Result};
use crate::lm::{GenerateRequest, LmBackend};
use crate::text::{detokenize, LmTokenizer};

pub const CLOSED_BOOK_INSTRUCTION: &str = "Answer these questions:";
pub const OPEN_BOOK_INSTRUCTION: &str = "Based on these texts, answer these questions:";
pub const DEFAULT_NUM_DOCS: usize = 2;
pub const DEFAULT_MAX_ANSWER_TOKENS: usize = 16;
pub const ANSWER_STOP: &str = "\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: String,
    #[serde(rename = "answers")]
    pub gold_answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaResult {
    pub item: QaItem,
    pub prompt: String,
    pub prediction: String,
    pub exact_match: u8,
    pub passages_used: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    /// Mean exact match times 100; 0 for an empty item list.
    pub exact_match: f64,
    pub num_items: usize,
    pub results: Vec<QaResult>,
}

fn clean_question(question: &str) -> Result<&str> {
    let q = question.trim();
    if q.is_empty() {
        return Err(RalmError::InvalidArgument("question is empty".into()));
    }
    Ok(q)
}

pub fn build_closed_book_prompt(question: &str) -> Result<String> {
    let q = clean_question(question)?;
    Ok(format!("{CLOSED_BOOK_INSTRUCTION}\nQ: {q}\nA:"))
}

/// Each passage as `"{title}\n\n{text}\n\n"`, followed by the instruction
/// and the question.
pub fn build_open_book_prompt<T: AsRef<str>, U: AsRef<str>>(
    passages: &[(T, U)],
    question: &str,
) -> Result<String> {
    if passages.is_empty() {
        return Err(RalmError::InvalidArgument(
            "open-book prompt needs at least one passage; use the closed-book prompt instead"
                .into(),
        ));
    }
    let q = clean_question(question)?;
    let mut out = String::new();
    for (title, text) in passages {
        out.push_str(title.as_ref());
        out.push_str("\n\n");
        out.push_str(text.as_ref());
        out.push_str("\n\n");
    }
    out.push_str(&format!("{OPEN_BOOK_INSTRUCTION}\nQ: {q}\nA:"));
    Ok(out)
}

/// Lowercases, strips punctuation and the articles a/an/the, and collapses
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation() && !is_unicode_punct(*c))
        .collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{00A1}' | '\u{00BF}' | '\u{00AB}' | '\u{00BB}'
    )
}

pub fn exact_match<S: AsRef<str>>(prediction: &str, gold_answers: &[S]) -> u8 {
    let p = normalize_answer(prediction);
    gold_answers
        .iter()
        .any(|g| normalize_answer(g.as_ref()) == p) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaConfig {
    pub num_docs: usize,
    pub max_new_tokens: usize,
    pub max_passage_tokens: usize,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            num_docs: DEFAULT_NUM_DOCS,
            max_new_tokens: DEFAULT_MAX_ANSWER_TOKENS,
            max_passage_tokens: crate::engine::DEFAULT_MAX_PASSAGE_TOKENS,
        }
    }
}

/// Answers every item greedily. With a retriever the prompt is open-book
/// over the top `num_docs` passages retrieved by the question; without one
/// it is closed-book. A failed generation scores 0 and is annotated.
pub fn evaluate_qa(
    items: &[QaItem],
    retriever: Option<Retriever<'_>>,
    backend: &dyn LmBackend,
    cfg: &QaConfig,
) -> Result<QaReport> {
    let mut results = Vec::with_capacity(items.len());
    for item in items {
        let (prompt, passages_used) = match retriever {
            Some(r) => {
                let cands = r.candidates(&item.question, cfg.num_docs);
                let blocks: Vec<(String, String)> = cands
                    .iter()
                    .map(|c| {
                        let mut toks = LmTokenizer.tokenize(&c.passage.text);
                        toks.truncate(cfg.max_passage_tokens);
                        let text = if toks.len() < cfg.max_passage_tokens {
                            c.passage.text.clone()
                        } else {
                            detokenize(&toks)
                        };
                        (c.passage.display_title().to_string(), text)
                    })
                    .collect();
                let ids = cands.iter().map(|c| c.passage.passage_id).collect();
                if blocks.is_empty() {
                    (build_closed_book_prompt(&item.question)?, ids)
                } else {
                    (build_open_book_prompt(&blocks, &item.question)?, ids)
                }
            }
            None => (build_closed_book_prompt(&item.question)?, Vec::new()),
        };
        let req = GenerateRequest {
            prompt: prompt.clone(),
            max_new_tokens: cfg.max_new_tokens,
            stop: ANSWER_STOP.to_string(),
        };
        let (prediction, error) = match backend.generate(&req) {
            Ok(text) => (cut_at_stop(&text).trim().to_string(), None),
            Err(e) => (String::new(), Some(e.to_string())),
        };
        let em = if error.is_some() {
            0
        } else {
            exact_match(&prediction, &item.gold_answers)
        };
        results.push(QaResult {
            item: item.clone(),
            prompt,
            prediction,
            exact_match: em,
            passages_used,
            error,
        });
    }
    let exact_match = if results.is_empty() {
        0.0
    } else {
        100.0 * results.iter().map(|r| r.exact_match as f64).sum::<f64>() / results.len() as f64
    };
    Ok(QaReport {
        exact_match,
        num_items: results.len(),
        results,
    })
}

/// Remote backends may overrun the stop sequence; only text before it counts.
fn cut_at_stop(text: &str) -> &str {
    text.split(ANSWER_STOP).next().unwrap_or("")
}

/// Line-delimited `{question, answers}` records.
pub fn load_questions(path: &Path) -> Result<Vec<QaItem>> {
    let file = fs::File::open(path).map_err(|e| RalmError::io(path, e))?;
    let mut items = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RalmError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: QaItem = serde_json::from_str(&line).map_err(|e| RalmError::MalformedLine {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if item.question.trim().is_empty() || item.gold_answers.is_empty() {
            return Err(RalmError::MalformedLine {
                line: idx + 1,
                message: "question must be nonempty and answers nonempty".into(),
            });
        }
        items.push(item);
    }
    Ok(items)
}
