//! Recorded (document, thought, score) tables.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ProviderError;
use crate::hierarchy::{DocumentId, OptionThought, ScoreMatrix, ThoughtId};

/// One line of a score fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub doc: DocumentId,
    pub thought: ThoughtId,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreFixture {
    scores: HashMap<(DocumentId, ThoughtId), f64>,
    /// Documents in order of first appearance.
    order: Vec<DocumentId>,
}

impl ScoreFixture {
    pub fn from_records(records: impl IntoIterator<Item = ScoreRecord>) -> Result<Self, ProviderError> {
        let mut fixture = ScoreFixture::default();
        for (i, record) in records.into_iter().enumerate() {
            fixture.push(record, i + 1)?;
        }
        Ok(fixture)
    }

    fn push(&mut self, record: ScoreRecord, line: usize) -> Result<(), ProviderError> {
        if !record.score.is_finite() || record.score < 0.0 {
            return Err(ProviderError::Fixture {
                line,
                message: format!("score {} is not a finite non-negative number", record.score),
            });
        }
        if !self.order.contains(&record.doc) {
            self.order.push(record.doc.clone());
        }
        let key = (record.doc, record.thought);
        if self.scores.contains_key(&key) {
            return Err(ProviderError::Fixture {
                line,
                message: format!("duplicate entry for document `{}` and thought `{}`", key.0, key.1),
            });
        }
        self.scores.insert(key, record.score);
        Ok(())
    }

    /// Reads a line-delimited fixture file; see [`ScoreFixture::parse`].
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProviderError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses line-delimited `{"doc", "thought", "score"}` records. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, ProviderError> {
        let mut fixture = ScoreFixture::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ScoreRecord = serde_json::from_str(line).map_err(|e| ProviderError::Fixture {
                line: i + 1,
                message: e.to_string(),
            })?;
            fixture.push(record, i + 1)?;
        }
        Ok(fixture)
    }

    pub fn get(&self, doc: &DocumentId, thought: &ThoughtId) -> Option<f64> {
        self.scores.get(&(doc.clone(), thought.clone())).copied()
    }

    pub(crate) fn lookup(&self, doc: &DocumentId, thought: &ThoughtId) -> Result<f64, ProviderError> {
        self.get(doc, thought).ok_or_else(|| ProviderError::MissingFixtureEntry {
            doc: doc.clone(),
            thought: thought.clone(),
        })
    }

    pub fn documents(&self) -> &[DocumentId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Copies every entry into a score matrix.
    pub fn to_matrix(&self) -> ScoreMatrix {
        let mut matrix = ScoreMatrix::new();
        for ((doc, thought), score) in &self.scores {
            matrix
                .insert(doc.clone(), thought.clone(), *score)
                .expect("fixture scores are validated on load");
        }
        matrix
    }
}

/// The recorded score, checked against the thought's binary flag.
pub fn score_table(fixture: &ScoreFixture, doc: &DocumentId, thought: &OptionThought) -> Result<f64, ProviderError> {
    let score = fixture.lookup(doc, &thought.id)?;
    if thought.binary && score != 0.0 && score != 1.0 {
        return Err(ProviderError::NonBinary {
            doc: doc.clone(),
            thought: thought.id.clone(),
            score,
        });
    }
    Ok(score)
}
