use serde::{Deserialize, Serialize};

use super::{evaluate_perplexity, RalmConfig, Rerankers, Retriever};
use crate::error::{RalmError, Result};
use crate::lm::LmBackend;

pub const SWEEP_CSV_HEADER: &str = "axis_value,token_ppl,word_ppl,total_nll,tokens,words";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Stride,
    QueryLen,
}

impl std::str::FromStr for SweepAxis {
    type Err = RalmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stride" => Ok(SweepAxis::Stride),
            "query-len" | "query_len" => Ok(SweepAxis::QueryLen),
            other => Err(RalmError::InvalidArgument(format!(
                "unknown sweep axis {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: usize,
    pub token_ppl: f64,
    pub word_ppl: f64,
    pub total_nll: f64,
    pub tokens: usize,
    pub words: usize,
}

/// One evaluation per value of `axis`, everything else held at `cfg`.
pub fn sweep(
    text: &str,
    retriever: Option<Retriever<'_>>,
    generator: &dyn LmBackend,
    axis: SweepAxis,
    values: &[usize],
    cfg: &RalmConfig,
    rerankers: Rerankers<'_>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(RalmError::InvalidArgument(
            "sweep needs at least one value".into(),
        ));
    }
    values
        .iter()
        .map(|&value| {
            let mut run = cfg.clone();
            match axis {
                SweepAxis::Stride => run.stride = value,
                SweepAxis::QueryLen => run.query_len = value,
            }
            let r = evaluate_perplexity(text, retriever, generator, &run, rerankers)?;
            Ok(SweepRow {
                axis_value: value,
                token_ppl: r.token_ppl,
                word_ppl: r.word_ppl,
                total_nll: r.total_nll,
                tokens: r.token_count,
                words: r.word_count,
            })
        })
        .collect()
}

/// CSV with [`SWEEP_CSV_HEADER`]; floats use the shortest round-trip form.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.axis_value, r.token_ppl, r.word_ppl, r.total_nll, r.tokens, r.words
        ));
    }
    out
}
