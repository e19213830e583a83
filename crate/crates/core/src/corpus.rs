//! Document ingestion, fixed-size passage chunking, decontamination and
//! passage-set persistence.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{RalmError, Result};
use crate::text::whitespace_words;

pub const DEFAULT_WORDS_PER_PASSAGE: usize = 100;

const PASSAGE_STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "id")]
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

/// A contiguous run of at most `words_per_passage` words of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: usize,
    pub source_doc_id: String,
    /// Title of the source document, carried for prompt building.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// Half-open `[start, end)` word indices into the source document.
    pub word_span: (usize, usize),
    pub text: String,
}

impl Passage {
    pub fn display_title(&self) -> &str {
        self.title.as_deref().unwrap_or(&self.source_doc_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageSet {
    passages: Vec<Passage>,
    fingerprint: String,
}

impl PassageSet {
    /// Builds a set, checking that ids are exactly `0..len`.
    pub fn new(passages: Vec<Passage>) -> Result<Self> {
        if let Some((pos, p)) = passages
            .iter()
            .enumerate()
            .find(|(i, p)| p.passage_id != *i)
        {
            return Err(RalmError::Corruption(format!(
                "passage at position {pos} has id {}",
                p.passage_id
            )));
        }
        let fingerprint = fingerprint_texts(&passages);
        Ok(PassageSet {
            passages,
            fingerprint,
        })
    }

    pub fn empty() -> Self {
        PassageSet::new(Vec::new()).expect("empty set is valid")
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn get(&self, id: usize) -> Option<&Passage> {
        self.passages.get(id)
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    /// SHA-256 over the ordered passage texts.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

fn fingerprint_texts(passages: &[Passage]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((passages.len() as u64).to_le_bytes());
    for p in passages {
        hasher.update((p.text.len() as u64).to_le_bytes());
        hasher.update(p.text.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Reads line-delimited JSON documents (`id`, optional `title`, `text`).
/// Blank lines are skipped.
pub fn ingest(path: &Path) -> Result<Vec<Document>> {
    let file = fs::File::open(path).map_err(|e| RalmError::io(path, e))?;
    parse_documents(BufReader::new(file)).map_err(|e| match e {
        RalmError::Io { source, .. } => RalmError::io(path, source),
        other => other,
    })
}

pub fn parse_documents<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| RalmError::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| RalmError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if doc.doc_id.is_empty() {
            return Err(RalmError::MalformedLine {
                line: line_no,
                message: "empty id".into(),
            });
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(RalmError::DuplicateId(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Partitions each document's word stream left to right into passages of
/// `words_per_passage` words, keeping a shorter remainder chunk.
pub fn chunk_documents(docs: &[Document], words_per_passage: usize) -> Result<PassageSet> {
    if words_per_passage == 0 {
        return Err(RalmError::InvalidArgument(
            "words_per_passage must be at least 1".into(),
        ));
    }
    let mut passages = Vec::new();
    for doc in docs {
        let words = whitespace_words(&doc.text);
        for (chunk_idx, chunk) in words.chunks(words_per_passage).enumerate() {
            let start = chunk_idx * words_per_passage;
            passages.push(Passage {
                passage_id: passages.len(),
                source_doc_id: doc.doc_id.clone(),
                title: doc.title.clone(),
                word_span: (start, start + chunk.len()),
                text: chunk.join(" "),
            });
        }
    }
    PassageSet::new(passages)
}

/// Case-folds and collapses whitespace, the key used for title matching.
pub fn normalize_title(title: &str) -> String {
    whitespace_words(&title.to_lowercase()).join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub kept: Vec<Document>,
    pub removed_count: usize,
    /// Blocklist entries that matched nothing.
    pub warnings: Vec<String>,
}

/// Removes every document whose id equals a blocklist key or whose
/// normalized title equals a normalized key.
pub fn exclude_documents<S: AsRef<str>>(docs: Vec<Document>, blocklist: &[S]) -> Exclusion {
    let keys: Vec<(&str, String)> = blocklist
        .iter()
        .map(|k| (k.as_ref(), normalize_title(k.as_ref())))
        .collect();
    let mut matched = vec![false; keys.len()];
    let mut kept = Vec::with_capacity(docs.len());
    let mut removed_count = 0;

    for doc in docs {
        let title = doc.title.as_deref().map(normalize_title);
        let mut hit = false;
        for (i, (raw, norm)) in keys.iter().enumerate() {
            if doc.doc_id == *raw || title.as_deref() == Some(norm.as_str()) {
                matched[i] = true;
                hit = true;
            }
        }
        if hit {
            removed_count += 1;
        } else {
            kept.push(doc);
        }
    }

    let warnings = keys
        .iter()
        .zip(&matched)
        .filter(|(_, m)| !**m)
        .map(|((raw, _), _)| format!("blocklist entry {raw:?} matched no document"))
        .collect();
    Exclusion {
        kept,
        removed_count,
        warnings,
    }
}

/// Reads a blocklist: one key per line, blank lines ignored.
pub fn read_blocklist(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| RalmError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

#[derive(Serialize, Deserialize)]
struct PassageStore {
    format_version: u32,
    fingerprint: String,
    passages: Vec<Passage>,
}

pub fn persist_passages(set: &PassageSet, path: &Path) -> Result<()> {
    let store = PassageStore {
        format_version: PASSAGE_STORE_VERSION,
        fingerprint: set.fingerprint.clone(),
        passages: set.passages.clone(),
    };
    let bytes = serde_json::to_vec(&store).map_err(|e| RalmError::Corruption(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| RalmError::io(path, e))
}

pub fn load_passages(path: &Path) -> Result<PassageSet> {
    let bytes = fs::read(path).map_err(|e| RalmError::io(path, e))?;
    decode_passages(&bytes)
}

pub fn decode_passages(bytes: &[u8]) -> Result<PassageSet> {
    let store: PassageStore = serde_json::from_slice(bytes)
        .map_err(|e| RalmError::Corruption(format!("passage store: {e}")))?;
    if store.format_version != PASSAGE_STORE_VERSION {
        return Err(RalmError::Corruption(format!(
            "unsupported passage store version {}",
            store.format_version
        )));
    }
    for p in &store.passages {
        let (start, end) = p.word_span;
        if end < start || whitespace_words(&p.text).len() != end - start {
            return Err(RalmError::Corruption(format!(
                "passage {} span does not match its text",
                p.passage_id
            )));
        }
    }
    let set = PassageSet::new(store.passages)?;
    if set.fingerprint != store.fingerprint {
        return Err(RalmError::FingerprintMismatch {
            expected: store.fingerprint,
            found: set.fingerprint,
        });
    }
    Ok(set)
}
