use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ralm_core::bm25::{DEFAULT_B, DEFAULT_K1};
use ralm_core::corpus::DEFAULT_WORDS_PER_PASSAGE;
use ralm_core::engine::{
    RerankMode, SweepAxis, DEFAULT_MAX_PASSAGE_TOKENS, DEFAULT_QUERY_LEN, DEFAULT_RERANK_WINDOW,
    DEFAULT_STRIDE, DEFAULT_TOP_K,
};
use ralm_core::odqa::{DEFAULT_MAX_ANSWER_TOKENS, DEFAULT_NUM_DOCS};

#[derive(Parser, Debug)]
#[command(
    name = "ralm",
    version,
    about = "In-context retrieval-augmented language model evaluation"
)]
pub struct Cli {
    /// TOML file with the same keys as the flags, or a previous JSON report
    /// whose manifest config is reused. Flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Chunk a JSONL document collection into passages.
    Ingest(IngestArgs),
    /// Build a BM25 index over a passage file.
    Index(IndexArgs),
    /// Query an index.
    Search(SearchArgs),
    /// Train the built-in cache n-gram model on plain text.
    LmTrain(LmTrainArgs),
    /// Retrieval-augmented perplexity of a text.
    EvalPpl(EvalPplArgs),
    /// Perplexity over a range of strides or query lengths.
    Sweep(SweepArgs),
    /// Collect predictive-reranker training examples.
    RerankCollect(RerankCollectArgs),
    /// Train a predictive reranker.
    RerankTrain(RerankTrainArgs),
    /// Closed- or open-book question answering with exact match.
    Odqa(OdqaArgs),
    /// Serve a built-in model over the scoring protocol.
    Serve(ServeArgs),
    /// Check a scoring server against the protocol.
    Conformance(ConformanceArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct IngestArgs {
    /// JSONL with one `{id, title?, text}` object per line.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File of titles to drop, one per line.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_WORDS_PER_PASSAGE)]
    pub words_per_passage: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct IndexArgs {
    #[arg(long)]
    pub passages: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K1)]
    pub k1: f64,
    #[arg(long, default_value_t = DEFAULT_B)]
    pub b: f64,
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub remove_stopwords: bool,
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub stem: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SearchArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Passage file, to include passage text in the output.
    #[arg(long)]
    pub passages: Option<PathBuf>,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub k: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LmTrainArgs {
    /// Plain training text.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = ralm_core::lm::DEFAULT_MAX_CONTEXT_TOKENS)]
    pub max_context_tokens: usize,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags shared by every command that runs the evaluation loop.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EngineArgs {
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Passage file the index was built from.
    #[arg(long)]
    pub passages: Option<PathBuf>,
    /// `builtin:PATH` or `http:URL`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    pub stride: usize,
    #[arg(long, default_value_t = DEFAULT_QUERY_LEN)]
    pub query_len: usize,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub topk: usize,
    /// none, zero-shot, predictive or oracle.
    #[arg(long, default_value = "none")]
    pub rerank: RerankMode,
    /// Zero-shot reranking model; defaults to the generator.
    #[arg(long)]
    pub rerank_backend: Option<String>,
    #[arg(long, default_value_t = DEFAULT_RERANK_WINDOW)]
    pub rerank_window: usize,
    /// Trained predictive reranker.
    #[arg(long)]
    pub rerank_model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_PASSAGE_TOKENS)]
    pub max_passage_tokens: usize,
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub no_retrieval: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalPplArgs {
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SweepArgs {
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// stride or query-len.
    #[arg(long)]
    pub axis: Option<SweepAxis>,
    /// Comma-separated values, e.g. `1,4,16,64`.
    #[arg(long)]
    pub values: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RerankCollectArgs {
    /// Plain text to sample stride boundaries from.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 1000)]
    pub num: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RerankTrainArgs {
    #[arg(long)]
    pub examples: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_QUERY_LEN)]
    pub query_len: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OdqaArgs {
    /// JSONL with one `{question, answers}` object per line.
    #[arg(long)]
    pub questions: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long, action = ArgAction::SetTrue)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub open_book: bool,
    #[arg(long, default_value_t = DEFAULT_NUM_DOCS)]
    pub num_docs: usize,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub passages: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_ANSWER_TOKENS)]
    pub max_new_tokens: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_PASSAGE_TOKENS)]
    pub max_passage_tokens: usize,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ServeArgs {
    /// Model file written by `lm-train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConformanceArgs {
    #[arg(long)]
    pub url: Option<String>,
}
