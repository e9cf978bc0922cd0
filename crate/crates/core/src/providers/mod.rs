//! Relevance providers: where a thought's score ρ(d, t) comes from.

pub mod bm25;
pub mod chat;
pub mod keyword;
pub mod table;
pub mod text;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::hierarchy::{DocumentId, OptionThought, ThoughtId};

pub use bm25::{bm25_rank, score_bm25, Bm25Params, CorpusStats};
pub use chat::{ChatClient, ChatMode, ChatTemplate, TranscriptStore};
pub use keyword::{score_keyword, Normalization, SynonymHook, SynonymList};
pub use table::{score_table, ScoreFixture, ScoreRecord};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("BM25 statistics were built from an empty corpus")]
    EmptyCorpusStats,
    #[error("line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no recorded score for document `{doc}` and thought `{thought}`")]
    MissingFixtureEntry { doc: DocumentId, thought: ThoughtId },
    #[error("thought `{thought}` is binary but document `{doc}` scored {score}")]
    NonBinary { doc: DocumentId, thought: ThoughtId, score: f64 },
    #[error("thought `{thought}` produced invalid score {score} for document `{doc}`")]
    InvalidScore { doc: DocumentId, thought: ThoughtId, score: f64 },
    #[error("provider needs a {0}, but none is configured")]
    Unresolved(String),
    #[error("invalid provider binding for thought `{thought}`: {message}")]
    Binding { thought: ThoughtId, message: String },
    #[error("chat request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("unparseable model reply: {raw:?}")]
    Parse { raw: String },
    #[error("no transcript entry for request digest {digest}")]
    MissingTranscript { digest: String },
    #[error("credential environment variable `{0}` is not set")]
    Credential(String),
}

impl ProviderError {
    /// True for failures caused by the remote service rather than by input data.
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Transport { .. } | Self::Credential(_))
    }
}

/// Which provider scores a thought.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderBinding {
    /// Pre-recorded score table.
    Table {},
    /// 1 when any keyword occurs in the document.
    Keyword {
        keywords: Vec<String>,
        #[serde(default)]
        normalization: Normalization,
    },
    /// 1 when the inner score is at least `tau`.
    Threshold { inner: Box<ProviderBinding>, tau: f64 },
    /// BM25 against `query`, or the run query when absent.
    Bm25 {
        #[serde(default = "bm25::default_k1")]
        k1: f64,
        #[serde(default = "bm25::default_b")]
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        query: Option<String>,
    },
    /// Chat-completion judgement of the thought's criterion.
    Chat { model: String, template: ChatTemplate },
}

impl Default for ProviderBinding {
    fn default() -> Self {
        Self::Table {}
    }
}

impl ProviderBinding {
    /// True when scoring may issue chat requests.
    pub fn uses_chat(&self) -> bool {
        match self {
            Self::Chat { .. } => true,
            Self::Threshold { inner, .. } => inner.uses_chat(),
            _ => false,
        }
    }
}

/// 1 when `inner ≥ tau`, else 0.
pub fn score_threshold(inner: f64, tau: f64) -> f64 {
    if inner >= tau {
        1.0
    } else {
        0.0
    }
}

/// Shared resources the providers draw on during a run.
#[derive(Clone, Default)]
pub struct ProviderRegistry {
    table: Option<Arc<ScoreFixture>>,
    bm25: Option<Arc<CorpusStats>>,
    chat: Option<Arc<ChatClient>>,
    synonyms: Option<Arc<dyn SynonymHook>>,
}

impl std::fmt::Debug for ProviderRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderRegistry")
            .field("table", &self.table.as_ref().map(|t| t.len()))
            .field("bm25", &self.bm25.as_ref().map(|s| s.document_count()))
            .field("chat", &self.chat)
            .field("synonyms", &self.synonyms.is_some())
            .finish()
    }
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_table(mut self, table: ScoreFixture) -> Self {
        self.table = Some(Arc::new(table));
        self
    }

    pub fn with_bm25(mut self, stats: CorpusStats) -> Self {
        self.bm25 = Some(Arc::new(stats));
        self
    }

    pub fn with_chat(mut self, client: ChatClient) -> Self {
        self.chat = Some(Arc::new(client));
        self
    }

    pub fn with_synonyms(mut self, hook: Arc<dyn SynonymHook>) -> Self {
        self.synonyms = Some(hook);
        self
    }

    pub fn table(&self) -> Option<&ScoreFixture> {
        self.table.as_deref()
    }

    pub fn chat(&self) -> Option<&ChatClient> {
        self.chat.as_deref()
    }

    /// Verifies that `thought`'s binding is well formed and its resources are present.
    pub fn check(&self, thought: &OptionThought) -> Result<(), ProviderError> {
        self.check_binding(thought, &thought.provider)
    }

    fn check_binding(&self, thought: &OptionThought, binding: &ProviderBinding) -> Result<(), ProviderError> {
        let invalid = |message: &str| ProviderError::Binding {
            thought: thought.id.clone(),
            message: message.to_owned(),
        };
        match binding {
            ProviderBinding::Table {} => {
                self.table.as_ref().ok_or_else(|| ProviderError::Unresolved("score table".into()))?;
            }
            ProviderBinding::Keyword { keywords, .. } => {
                if keywords.is_empty() || keywords.iter().any(|k| text::tokens(k).is_empty()) {
                    return Err(invalid("keywords must be non-empty and contain a word"));
                }
            }
            ProviderBinding::Threshold { inner, tau } => {
                if !tau.is_finite() {
                    return Err(invalid("threshold must be finite"));
                }
                self.check_binding(thought, inner)?;
            }
            ProviderBinding::Bm25 { k1, b, .. } => {
                if !(k1.is_finite() && *k1 >= 0.0 && (0.0..=1.0).contains(b)) {
                    return Err(invalid("BM25 needs k1 >= 0 and 0 <= b <= 1"));
                }
                let stats = self.bm25.as_ref().ok_or_else(|| ProviderError::Unresolved("BM25 corpus".into()))?;
                if stats.document_count() == 0 {
                    return Err(ProviderError::EmptyCorpusStats);
                }
            }
            ProviderBinding::Chat { model, .. } => {
                if model.trim().is_empty() {
                    return Err(invalid("chat model must be named"));
                }
                if thought.criterion.trim().is_empty() {
                    return Err(invalid("chat-scored thoughts need a criterion"));
                }
                self.chat.as_ref().ok_or_else(|| ProviderError::Unresolved("chat client".into()))?;
            }
        }
        Ok(())
    }

    /// ρ(doc, thought), validated as finite, non-negative and, for binary thoughts, 0 or 1.
    pub fn score(&self, thought: &OptionThought, doc: &Document, query: &str) -> Result<f64, ProviderError> {
        let score = self.raw(&thought.provider, thought, doc, query)?;
        if !score.is_finite() || score < 0.0 {
            return Err(ProviderError::InvalidScore {
                doc: doc.id.clone(),
                thought: thought.id.clone(),
                score,
            });
        }
        if thought.binary && score != 0.0 && score != 1.0 {
            return Err(ProviderError::NonBinary {
                doc: doc.id.clone(),
                thought: thought.id.clone(),
                score,
            });
        }
        Ok(score)
    }

    fn raw(&self, binding: &ProviderBinding, thought: &OptionThought, doc: &Document, query: &str) -> Result<f64, ProviderError> {
        match binding {
            ProviderBinding::Table {} => {
                let table = self.table.as_ref().ok_or_else(|| ProviderError::Unresolved("score table".into()))?;
                table.lookup(&doc.id, &thought.id)
            }
            ProviderBinding::Keyword { keywords, normalization } => {
                Ok(score_keyword(doc, keywords, *normalization, self.synonyms.as_deref()))
            }
            ProviderBinding::Threshold { inner, tau } => {
                Ok(score_threshold(self.raw(inner, thought, doc, query)?, *tau))
            }
            ProviderBinding::Bm25 { k1, b, query: own } => {
                let stats = self.bm25.as_ref().ok_or_else(|| ProviderError::Unresolved("BM25 corpus".into()))?;
                score_bm25(stats, own.as_deref().unwrap_or(query), doc, Bm25Params { k1: *k1, b: *b })
            }
            ProviderBinding::Chat { model, template } => {
                let client = self.chat.as_ref().ok_or_else(|| ProviderError::Unresolved("chat client".into()))?;
                chat::score_chat(client, model, *template, query, &thought.criterion, doc)
            }
        }
    }
}
