//! Pipeline configuration documents.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{ComparatorSpec, OptionThought, ThoughtId};
use crate::pipeline::{AggregationMetric, LayerSpec, PipelineError, PipelineSpec, RefineSpec, RefinementBinding};
use crate::providers::{ChatMode, ProviderBinding};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    /// File holding the query text; used when `query` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub mode: ChatMode,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Comparator for locally-better layers that do not set their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<ComparatorSpec>,
    #[serde(default)]
    pub providers: ProvidersConfig,
    pub layers: Vec<LayerConfig>,
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    /// Score fixture backing `table` thoughts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chat: Option<ChatConfig>,
    /// Extra surface forms per keyword.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synonyms: Option<HashMap<String, Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatConfig {
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    /// Name of the environment variable holding the bearer credential.
    #[serde(default = "default_credential_env")]
    pub credential_env: String,
    /// Transcript file read in replay mode and appended to in record mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_endpoint() -> String {
    "https://api.openai.com/v1/chat/completions".into()
}

fn default_credential_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_in_flight() -> usize {
    4
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub name: String,
    pub metric: AggregationMetric,
    /// Thoughts per level, strongest first.
    pub levels: Vec<Vec<ThoughtConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<ComparatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThoughtConfig {
    pub id: ThoughtId,
    #[serde(default)]
    pub criterion: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Defaults to true for keyword and threshold providers, false otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<bool>,
    #[serde(default)]
    pub provider: ProviderBinding,
}

fn default_weight() -> f64 {
    1.0
}

impl ThoughtConfig {
    fn to_thought(&self) -> OptionThought {
        let binary = self.binary.unwrap_or(matches!(
            self.provider,
            ProviderBinding::Keyword { .. } | ProviderBinding::Threshold { .. }
        ));
        OptionThought::new(self.id.clone(), 0, 0)
            .with_weight(self.weight)
            .with_criterion(self.criterion.clone())
            .with_binary(binary)
            .with_provider(self.provider.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    #[serde(default = "default_budget")]
    pub budget: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hook: Option<RefinementConfig>,
}

fn default_budget() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefinementConfig {
    Static { alternatives: Vec<Vec<Vec<ThoughtConfig>>> },
    Chat { model: String },
}

fn levels(levels: &[Vec<ThoughtConfig>]) -> Vec<Vec<OptionThought>> {
    levels.iter().map(|level| level.iter().map(ThoughtConfig::to_thought).collect()).collect()
}

impl PipelineConfig {
    /// Parses a JSON document; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let deserializer = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(deserializer).map_err(|e| ConfigError::Invalid {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.query_file.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.providers.table.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.providers.chat.as_mut().and_then(|c| c.transcripts.as_mut()) {
            resolve(p);
        }
    }

    /// The query text, from `query` or else `query_file`.
    pub fn query_text(&self) -> Result<Option<String>, ConfigError> {
        if let Some(query) = &self.query {
            return Ok(Some(query.clone()));
        }
        match &self.query_file {
            Some(path) => std::fs::read_to_string(path)
                .map(|q| Some(q.trim().to_owned()))
                .map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                }),
            None => Ok(None),
        }
    }

    /// True when any thought or refinement hook talks to a chat model.
    pub fn uses_chat(&self) -> bool {
        self.layers.iter().any(|layer| {
            layer.levels.iter().flatten().any(|t| t.provider.uses_chat())
                || matches!(layer.refine.as_ref().and_then(|r| r.hook.as_ref()), Some(RefinementConfig::Chat { .. }))
        })
    }

    pub fn uses_bm25(&self) -> bool {
        fn bm25(binding: &ProviderBinding) -> bool {
            match binding {
                ProviderBinding::Bm25 { .. } => true,
                ProviderBinding::Threshold { inner, .. } => bm25(inner),
                _ => false,
            }
        }
        self.layers.iter().flat_map(|l| l.levels.iter().flatten()).any(|t| bm25(&t.provider))
    }

    /// Validated pipeline with thoughts stamped by position.
    pub fn to_spec(&self) -> Result<PipelineSpec, ConfigError> {
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid {
                path: "parallelism".into(),
                message: "parallelism must be at least 1".into(),
            });
        }
        if self.query.is_some() && self.query_file.is_some() {
            return Err(ConfigError::Invalid {
                path: "query_file".into(),
                message: "set either query or query_file, not both".into(),
            });
        }
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let comparator = match layer.metric {
                    AggregationMetric::LocallyBetter => layer.comparator.or(self.comparator),
                    _ => layer.comparator,
                };
                let refine = match &layer.refine {
                    None => RefineSpec::default(),
                    Some(refine) => RefineSpec {
                        budget: refine.budget,
                        hook: refine.hook.as_ref().map(|hook| match hook {
                            RefinementConfig::Static { alternatives } => RefinementBinding::Static {
                                alternatives: alternatives.iter().map(|a| levels(a)).collect(),
                            },
                            RefinementConfig::Chat { model } => RefinementBinding::Chat { model: model.clone() },
                        }),
                    },
                };
                LayerSpec {
                    name: layer.name.clone(),
                    levels: levels(&layer.levels),
                    metric: layer.metric,
                    comparator,
                    refine,
                }
            })
            .collect();
        Ok(PipelineSpec::new(layers, self.top_k)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "query": "q",
        "layers": [
            {"name": "KFL", "metric": {"at_least_k": 1},
             "levels": [[{"id": "kw", "provider": {"kind": "keyword", "keywords": ["minor"]}}]]},
            {"name": "SFL", "metric": "locally_better", "levels": [[{"id": "s1"}]]}
        ]
    }"#;

    #[test]
    fn minimal_config_builds_a_spec() {
        let config = PipelineConfig::from_json(MINIMAL).unwrap();
        assert_eq!(config.mode, ChatMode::Replay);
        assert_eq!(config.parallelism, 4);
        let spec = config.to_spec().unwrap();
        let kw = &spec.layers[0].levels[0][0];
        assert!(kw.binary);
        assert_eq!((kw.layer, kw.level), (1, 1));
        assert!(!spec.layers[1].levels[0][0].binary);
        assert!(!config.uses_chat());
    }

    #[test]
    fn unknown_fields_are_rejected_with_a_path() {
        let text = MINIMAL.replace(r#""id": "s1""#, r#""id": "s1", "wieght": 2"#);
        match PipelineConfig::from_json(&text) {
            Err(ConfigError::Invalid { path, .. }) => assert_eq!(path, "layers[1].levels[0][0].wieght"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_carry_paths() {
        let text = MINIMAL.replace(r#"{"at_least_k": 1}"#, r#"{"at_least_k": 3}"#);
        let err = PipelineConfig::from_json(&text).unwrap().to_spec().unwrap_err();
        assert!(err.to_string().contains("layers[0].metric"), "{err}");
    }

    #[test]
    fn default_comparator_applies_to_locally_better_layers() {
        let text = MINIMAL.replace(r#""query": "q","#, r#""query": "q", "comparator": {"global": {"aggregator": "worst_case"}},"#);
        let spec = PipelineConfig::from_json(&text).unwrap().to_spec().unwrap();
        assert!(spec.layers[1].comparator.unwrap().is_total());
        assert!(spec.layers[0].comparator.is_none());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut config = PipelineConfig::from_json(MINIMAL).unwrap();
        config.providers.table = Some("scores.jsonl".into());
        config.resolve_paths(Path::new("/data/run"));
        assert_eq!(config.providers.table.unwrap(), Path::new("/data/run/scores.jsonl"));
    }
}
