//! Inverted index with exhaustive BM25 scoring.
//!
//! Scoring, for a query analyzed into terms `q_1..q_m` (repeats kept):
//!
//! ```text
//! score(q, p) = Σ_i idf(q_i) · tf·(k1+1) / (tf + k1·(1 − b + b·len(p)/avgdl))
//! idf(t)      = ln(1 + (N − n_t + 0.5) / (n_t + 0.5))
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::PassageSet;
use crate::error::{RalmError, Result};
use crate::text::{Analyzer, AnalyzerOptions};

pub const DEFAULT_K1: f64 = 0.9;
pub const DEFAULT_B: f64 = 0.4;

const INDEX_MAGIC: &[u8; 8] = b"RALMBM25";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: DEFAULT_K1,
            b: DEFAULT_B,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(RalmError::InvalidArgument(format!(
                "k1 must be >= 0, got {}",
                self.k1
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RalmError::InvalidArgument(format!(
                "b must lie in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// `(passage_id, term_frequency)`
pub type Posting = (u32, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    params: Bm25Params,
    analyzer: AnalyzerOptions,
    corpus_fingerprint: String,
    avgdl: f64,
    doc_len: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryResult {
    pub passage_id: usize,
    pub score: f64,
}

/// Robertson IDF with the `+1` inside the log; nonnegative for `n_t <= N`.
pub fn idf(num_docs: usize, doc_freq: usize) -> f64 {
    let n = num_docs as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Saturated term-frequency factor of one term in one passage.
pub fn tf_component(tf: u32, doc_len: u32, avgdl: f64, params: Bm25Params) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = tf as f64;
    let norm = 1.0 - params.b + params.b * doc_len as f64 / avgdl;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// Orders results by descending score, then ascending passage id.
pub fn rank_order(a: &QueryResult, b: &QueryResult) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.passage_id.cmp(&b.passage_id))
}

impl InvertedIndex {
    pub fn build(set: &PassageSet, params: Bm25Params) -> Result<Self> {
        InvertedIndex::build_with(set, params, AnalyzerOptions::default())
    }

    pub fn build_with(
        set: &PassageSet,
        params: Bm25Params,
        analyzer: AnalyzerOptions,
    ) -> Result<Self> {
        params.validate()?;
        let az = Analyzer::new(analyzer);
        let mut doc_len = Vec::with_capacity(set.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for p in set.passages() {
            let terms = az.analyze(&p.text);
            doc_len.push(terms.len() as u32);
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in terms {
                *tf.entry(t).or_default() += 1;
            }
            // Passages are visited in id order, so each list stays sorted.
            for (term, count) in tf {
                postings
                    .entry(term)
                    .or_default()
                    .push((p.passage_id as u32, count));
            }
        }
        let avgdl = if doc_len.is_empty() {
            0.0
        } else {
            doc_len.iter().map(|&l| l as u64).sum::<u64>() as f64 / doc_len.len() as f64
        };
        Ok(InvertedIndex {
            params,
            analyzer,
            corpus_fingerprint: set.fingerprint().to_string(),
            avgdl,
            doc_len,
            postings,
        })
    }

    pub fn num_passages(&self) -> usize {
        self.doc_len.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_len(&self) -> &[u32] {
        &self.doc_len
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn analyzer_options(&self) -> AnalyzerOptions {
        self.analyzer
    }

    pub fn corpus_fingerprint(&self) -> &str {
        &self.corpus_fingerprint
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn analyze_query(&self, query_text: &str) -> Vec<String> {
        Analyzer::new(self.analyzer).analyze(query_text)
    }

    /// Top-`k` passages with a positive score.
    pub fn search(&self, query_text: &str, k: usize) -> Vec<QueryResult> {
        let terms = self.analyze_query(query_text);
        if terms.is_empty() || k == 0 || self.doc_len.is_empty() {
            return Vec::new();
        }
        let n = self.num_passages();
        let mut scores = vec![0.0f64; n];
        let mut touched = vec![false; n];
        for term in &terms {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let w = idf(n, list.len());
            for &(pid, tf) in list {
                let pid = pid as usize;
                scores[pid] += w * tf_component(tf, self.doc_len[pid], self.avgdl, self.params);
                touched[pid] = true;
            }
        }
        let mut results: Vec<QueryResult> = (0..n)
            .filter(|&p| touched[p] && scores[p] > 0.0)
            .map(|p| QueryResult {
                passage_id: p,
                score: scores[p],
            })
            .collect();
        results.sort_by(rank_order);
        results.truncate(k);
        results
    }

    /// Versioned little-endian binary encoding.
    ///
    /// Layout: magic, version, N, avgdl, k1, b, analyzer flags, fingerprint,
    /// `doc_len[N]`, term dictionary (term bytes, postings offset, postings
    /// count), then the concatenated postings.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.doc_len.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.avgdl.to_le_bytes());
        out.extend_from_slice(&self.params.k1.to_le_bytes());
        out.extend_from_slice(&self.params.b.to_le_bytes());
        out.push(self.analyzer.to_flags());
        write_str(&mut out, &self.corpus_fingerprint);
        for &l in &self.doc_len {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out.extend_from_slice(&(self.postings.len() as u64).to_le_bytes());
        let mut offset = 0u64;
        for (term, list) in &self.postings {
            write_str(&mut out, term);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(list.len() as u32).to_le_bytes());
            offset += list.len() as u64;
        }
        for list in self.postings.values() {
            for &(pid, tf) in list {
                out.extend_from_slice(&pid.to_le_bytes());
                out.extend_from_slice(&tf.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != INDEX_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(corrupt(&format!("unsupported index version {version}")));
        }
        let n = r.u64()? as usize;
        let avgdl = r.f64()?;
        let params = Bm25Params {
            k1: r.f64()?,
            b: r.f64()?,
        };
        let analyzer = AnalyzerOptions::from_flags(r.u8()?)
            .ok_or_else(|| corrupt("unknown analyzer flags"))?;
        let corpus_fingerprint = r.string()?;
        let mut doc_len = Vec::with_capacity(n.min(bytes.len() / 4));
        for _ in 0..n {
            doc_len.push(r.u32()?);
        }
        let num_terms = r.u64()? as usize;
        let mut dict = Vec::with_capacity(num_terms.min(bytes.len()));
        let mut expected_offset = 0u64;
        for _ in 0..num_terms {
            let term = r.string()?;
            let offset = r.u64()?;
            let count = r.u32()?;
            if offset != expected_offset {
                return Err(corrupt("postings offsets are not contiguous"));
            }
            expected_offset += count as u64;
            dict.push((term, count));
        }
        let mut postings = BTreeMap::new();
        for (term, count) in dict {
            let mut list = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let pid = r.u32()?;
                let tf = r.u32()?;
                if pid as usize >= n || tf == 0 {
                    return Err(corrupt("posting out of range"));
                }
                if list.last().is_some_and(|&(prev, _)| prev >= pid) {
                    return Err(corrupt("postings not sorted"));
                }
                list.push((pid, tf));
            }
            if postings.insert(term, list).is_some() {
                return Err(corrupt("duplicate term"));
            }
        }
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        params.validate().map_err(|e| corrupt(&e.to_string()))?;
        Ok(InvertedIndex {
            params,
            analyzer,
            corpus_fingerprint,
            avgdl,
            doc_len,
            postings,
        })
    }

    pub fn persist(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| RalmError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| RalmError::io(path, e))?;
        InvertedIndex::from_bytes(&bytes)
    }

    /// Fails unless this index was built from `set`.
    pub fn check_corpus(&self, set: &PassageSet) -> Result<()> {
        if self.corpus_fingerprint != set.fingerprint() || self.num_passages() != set.len() {
            return Err(RalmError::FingerprintMismatch {
                expected: self.corpus_fingerprint.clone(),
                found: set.fingerprint().to_string(),
            });
        }
        Ok(())
    }
}

fn corrupt(msg: &str) -> RalmError {
    RalmError::Corruption(format!("index: {msg}"))
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| corrupt("invalid utf-8"))
    }
}
