//! Line-delimited document corpora.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::hierarchy::{DocumentId, HierarchyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocumentId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub meta: Map<String, Value>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, HierarchyError> {
        Ok(Self {
            id: DocumentId::new(id)?,
            text: text.into(),
            meta: Map::new(),
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed document: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: document id is empty")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate document id `{id}` (first seen on line {first})")]
    DuplicateId { line: usize, id: String, first: usize },
}

impl CorpusError {
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Io { .. } => None,
            Self::Malformed { line, .. } | Self::EmptyId { line } | Self::DuplicateId { line, .. } => Some(*line),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    id: String,
    text: String,
    #[serde(default)]
    meta: Option<Map<String, Value>>,
}

/// Parses `{"id", "text", "meta"?}` records, one per line. Blank lines are skipped.
pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.id.trim().is_empty() {
            return Err(CorpusError::EmptyId { line: line_no });
        }
        if let Some(&first) = first_seen.get(&raw.id) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: raw.id,
                first,
            });
        }
        first_seen.insert(raw.id.clone(), line_no);
        docs.push(Document {
            id: DocumentId::new(raw.id).map_err(|_| CorpusError::EmptyId { line: line_no })?,
            text: raw.text,
            meta: raw.meta.unwrap_or_default(),
        });
    }
    Ok(docs)
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Document>, CorpusError> {
        parse_corpus(text.as_bytes())
    }

    #[test]
    fn reads_documents_in_order() {
        let docs = parse("{\"id\":\"a\",\"text\":\"x\"}\n\n{\"id\":\"b\",\"text\":\"y\",\"meta\":{\"art\":2}}\n").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].id.as_str(), "b");
        assert_eq!(docs[1].meta["art"], 2);
    }

    #[test]
    fn duplicate_id_cites_both_lines() {
        let err = parse("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\"}\n{\"id\":\"a\",\"text\":\"z\"}\n").unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 3, first: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_line_is_located() {
        let err = parse("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"\n").unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(err.to_string().starts_with("line 2:"));
    }

    #[test]
    fn empty_id_is_rejected() {
        let err = parse("{\"id\":\"  \",\"text\":\"x\"}\n").unwrap_err();
        assert!(matches!(err, CorpusError::EmptyId { line: 1 }));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse("{\"id\":\"a\",\"text\":\"x\",\"body\":1}\n").is_err());
    }
}
