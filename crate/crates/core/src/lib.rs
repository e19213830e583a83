//! In-context retrieval-augmented language modeling.
//!
//! A frozen LM is conditioned on a retrieved passage prepended to its input.
//! The crate provides the pieces needed to measure and improve that setup:
//!
//! - [`corpus`]: ingestion, 100-word passage chunking, decontamination
//! - [`bm25`]: inverted index and exhaustive BM25 search
//! - [`lm`]: scoring backends (built-in cache n-gram LM, HTTP client)
//! - [`engine`]: stride-scheduled retrieval, context assembly, perplexity
//! - [`rerank`]: zero-shot LM reranking and a trained predictive reranker
//! - [`odqa`]: closed/open-book QA prompting and exact match
//! - [`server`] and [`conformance`]: the wire protocol, served and checked
//! - [`synthetic`]: seeded corpora with a known retrieval signal

pub mod bm25;
pub mod conformance;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod lm;
pub mod odqa;
pub mod rerank;
pub mod server;
pub mod synthetic;
pub mod text;

pub use error::{RalmError, Result};
