//! Retrieval-augmented bio prompts: whitespace-token chunking, lexical
//! retrieval, and the `Document [i] ...` prompt layout.
//!
//! Retrieval score for a chunk, with query terms `Q` taken from the entity
//! name (lowercased, surrounding punctuation stripped, deduplicated):
//!
//! ```text
//! score = Σ_{q∈Q} tf(q, chunk) · idf(q)  +  TITLE_WEIGHT · Σ_{q∈Q ∩ title} idf(q)
//! idf(q) = ln(1 + N / df(q))      (terms absent from the index contribute 0)
//! ```
//!
//! where `N` is the number of chunks and `df` the number of chunks holding
//! the term. Ties are broken by `(doc_id, chunk_index)` ascending.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_CHUNK_TOKENS: usize = 256;
pub const DEFAULT_TOP_K: usize = 3;
pub const TITLE_WEIGHT: f64 = 2.0;
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RagError {
    #[error("retrieval index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no chunks to build a prompt from")]
    NoChunks,
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("document {0} has an empty title")]
    EmptyTitle(String),
    #[error("unsupported index version {0}")]
    Version(u32),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalChunk {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    pub token_count: usize,
}

/// Greedy split of each document into maximal runs of at most
/// [`MAX_CHUNK_TOKENS`] whitespace tokens, joined by single spaces.
pub fn chunk_corpus(docs: &[CorpusDoc]) -> Vec<RetrievalChunk> {
    let mut out = Vec::new();
    for doc in docs {
        let tokens: Vec<&str> = doc.text.split_whitespace().collect();
        for (k, window) in tokens.chunks(MAX_CHUNK_TOKENS).enumerate() {
            out.push(RetrievalChunk {
                doc_id: doc.doc_id.clone(),
                chunk_index: k,
                text: window.join(" "),
                token_count: window.len(),
            });
        }
    }
    out
}

fn terms(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
}

/// Chunk index with per-document titles; persisted as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkIndex {
    pub version: u32,
    pub titles: BTreeMap<String, String>,
    pub chunks: Vec<RetrievalChunk>,
}

impl ChunkIndex {
    pub fn build(docs: &[CorpusDoc]) -> Result<Self, RagError> {
        if let Some(d) = docs.iter().find(|d| d.title.trim().is_empty()) {
            return Err(RagError::EmptyTitle(d.doc_id.clone()));
        }
        Ok(ChunkIndex {
            version: INDEX_VERSION,
            titles: docs.iter().map(|d| (d.doc_id.clone(), d.title.clone())).collect(),
            chunks: chunk_corpus(docs),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        let mut doc = serde_json::to_string_pretty(self).expect("index serializes");
        doc.push('\n');
        fs::write(path, doc).map_err(|source| RagError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RagError> {
        let raw = fs::read_to_string(path).map_err(|source| RagError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let index: ChunkIndex = serde_json::from_str(&raw).map_err(|e| RagError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if index.version != INDEX_VERSION {
            return Err(RagError::Version(index.version));
        }
        Ok(index)
    }

    /// Top-`k` chunks for the entity, best first.
    pub fn retrieve(&self, entity: &str, k: usize) -> Result<Vec<&RetrievalChunk>, RagError> {
        retrieve_with_titles(entity, &self.chunks, &self.titles, k)
    }
}

pub fn load_docs(path: &Path) -> Result<Vec<CorpusDoc>, RagError> {
    let raw = fs::read_to_string(path).map_err(|source| RagError::Io {
        path: path.display().to_string(),
        source,
    })?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let doc: CorpusDoc = serde_json::from_str(l).map_err(|e| RagError::Parse {
                path: path.display().to_string(),
                line: k + 1,
                message: e.to_string(),
            })?;
            if doc.title.trim().is_empty() {
                return Err(RagError::EmptyTitle(doc.doc_id));
            }
            Ok(doc)
        })
        .collect()
}

/// Ranks chunks by the lexical score above. Without titles, the title bonus
/// is zero.
pub fn retrieve<'a>(entity: &str, chunks: &'a [RetrievalChunk], k: usize) -> Result<Vec<&'a RetrievalChunk>, RagError> {
    retrieve_with_titles(entity, chunks, &BTreeMap::new(), k)
}

pub fn retrieve_with_titles<'a>(
    entity: &str,
    chunks: &'a [RetrievalChunk],
    titles: &BTreeMap<String, String>,
    k: usize,
) -> Result<Vec<&'a RetrievalChunk>, RagError> {
    if k == 0 {
        return Err(RagError::ZeroK);
    }
    if chunks.is_empty() {
        return Err(RagError::EmptyIndex);
    }
    let mut seen = HashSet::new();
    let query: Vec<String> = terms(entity).filter(|t| seen.insert(t.clone())).collect();

    let chunk_terms: Vec<HashMap<String, usize>> = chunks
        .iter()
        .map(|c| {
            let mut tf = HashMap::new();
            for t in terms(&c.text) {
                *tf.entry(t).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let n = chunks.len() as f64;
    let idf: HashMap<&str, f64> = query
        .iter()
        .map(|q| {
            let df = chunk_terms.iter().filter(|tf| tf.contains_key(q)).count();
            let w = if df == 0 { 0.0 } else { (1.0 + n / df as f64).ln() };
            (q.as_str(), w)
        })
        .collect();
    let title_terms: HashMap<&str, HashSet<String>> =
        titles.iter().map(|(id, t)| (id.as_str(), terms(t).collect())).collect();

    let mut scored: Vec<(f64, &RetrievalChunk)> = chunks
        .iter()
        .zip(&chunk_terms)
        .map(|(chunk, tf)| {
            let body: f64 = query
                .iter()
                .map(|q| *tf.get(q).unwrap_or(&0) as f64 * idf[q.as_str()])
                .sum();
            let title: f64 = title_terms
                .get(chunk.doc_id.as_str())
                .map(|tt| query.iter().filter(|q| tt.contains(*q)).map(|q| idf[q.as_str()]).sum())
                .unwrap_or(0.0);
            (body + TITLE_WEIGHT * title, chunk)
        })
        .collect();
    scored.sort_by(|(sa, a), (sb, b)| {
        sb.total_cmp(sa)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
            .then_with(|| a.chunk_index.cmp(&b.chunk_index))
    });
    Ok(scored.into_iter().take(k).map(|(_, c)| c).collect())
}

/// `Document [i] <text>` per chunk in rank order, then the bio question.
pub fn build_rag_prompt(entity: &str, chunks: &[&RetrievalChunk]) -> Result<String, RagError> {
    if chunks.is_empty() {
        return Err(RagError::NoChunks);
    }
    let mut lines: Vec<String> = chunks
        .iter()
        .enumerate()
        .map(|(i, c)| format!("Document [{i}] {}", c.text))
        .collect();
    lines.push(format!("Question: {}", crate::prompts::bio_prompt(entity)));
    Ok(lines.join("\n"))
}
