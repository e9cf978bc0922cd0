//! Okapi BM25 over the run corpus.
//!
//! score(D, Q) = Σ idf(q) · tf(q, D)·(k1 + 1) / (tf(q, D) + k1·(1 − b + b·|D|/avgdl))
//! with idf(q) = ln(1 + (N − n(q) + 0.5) / (n(q) + 0.5)), which is never negative.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{text, ProviderError};
use crate::corpus::Document;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bm25Params {
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
}

pub(super) fn default_k1() -> f64 {
    1.2
}

pub(super) fn default_b() -> f64 {
    0.75
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: default_k1(),
            b: default_b(),
        }
    }
}

/// Document frequencies and lengths for one corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    docs: usize,
    avg_len: f64,
    df: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn build(corpus: &[Document]) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut total_len = 0usize;
        for doc in corpus {
            let tokens = text::tokens(&doc.text);
            total_len += tokens.len();
            let unique: HashSet<String> = tokens.into_iter().collect();
            for term in unique {
                *df.entry(term).or_default() += 1;
            }
        }
        let avg_len = if corpus.is_empty() {
            0.0
        } else {
            total_len as f64 / corpus.len() as f64
        };
        Self {
            docs: corpus.len(),
            avg_len,
            df,
        }
    }

    pub fn document_count(&self) -> usize {
        self.docs
    }

    pub fn average_length(&self) -> f64 {
        self.avg_len
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.docs as f64;
        let nq = self.document_frequency(term) as f64;
        (1.0 + (n - nq + 0.5) / (nq + 0.5)).ln()
    }
}

pub fn score_bm25(stats: &CorpusStats, query: &str, doc: &Document, params: Bm25Params) -> Result<f64, ProviderError> {
    if stats.docs == 0 {
        return Err(ProviderError::EmptyCorpusStats);
    }
    let doc_tokens = text::tokens(&doc.text);
    if doc_tokens.is_empty() || stats.avg_len == 0.0 {
        return Ok(0.0);
    }
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for token in &doc_tokens {
        *tf.entry(token.as_str()).or_default() += 1;
    }
    let length_norm = 1.0 - params.b + params.b * doc_tokens.len() as f64 / stats.avg_len;
    let mut seen = HashSet::new();
    let mut score = 0.0;
    for term in text::tokens(query) {
        if !seen.insert(term.clone()) {
            continue;
        }
        let Some(&count) = tf.get(term.as_str()) else {
            continue;
        };
        let count = count as f64;
        score += stats.idf(&term) * count * (params.k1 + 1.0) / (count + params.k1 * length_norm);
    }
    Ok(score)
}

/// Scores every document and returns the best `top` (all when `None`),
/// highest first, ties in corpus order.
pub fn bm25_rank(
    stats: &CorpusStats,
    corpus: &[Document],
    query: &str,
    params: Bm25Params,
    top: Option<usize>,
) -> Result<Vec<(usize, f64)>, ProviderError> {
    let mut scored = corpus
        .iter()
        .enumerate()
        .map(|(i, doc)| score_bm25(stats, query, doc, params).map(|s| (i, s)))
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    if let Some(top) = top {
        scored.truncate(top);
    }
    Ok(scored)
}
