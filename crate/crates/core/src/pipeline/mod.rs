//! Layered criteria pipelines.
//!
//! Each layer scores its surviving inputs on its option thoughts and keeps a
//! subset according to its [`AggregationMetric`]. Comparator-based layers also
//! contribute their levels to a running hierarchy, so selection in a later
//! layer respects every earlier comparator layer.

mod hooks;
mod metric;
mod run;
mod trace;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{Aggregator, ComparatorSpec, DocumentId, HierarchyError, OptionThought, Slot, ThoughtId};
use crate::providers::ProviderError;
use crate::ranking::RankingError;

pub use hooks::{ChatRefinement, ExpansionHook, RefinementHook, StaticRefinement};
pub use metric::{
    apply_filter_metric, apply_metric, apply_optimal_metric, apply_optimal_metric_within, apply_rank_metric, RankEntry,
};
pub use run::{run_layer, run_pipeline, LayerOutcome, PipelineRun, RunFailure, RunOptions};
pub use trace::{replay_trace, verify_trace, BacktrackEvent, LayerRecord, PipelineTrace, RefinedThought};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error("layer {layer}: scoring document `{doc}` on thought `{thought}` failed: {source}")]
    Provider {
        layer: usize,
        doc: DocumentId,
        thought: ThoughtId,
        #[source]
        source: ProviderError,
    },
    #[error("layer {layer}: refinement failed: {source}")]
    Refinement {
        layer: usize,
        #[source]
        source: ProviderError,
    },
    #[error("trace replay diverges at layer {layer}: {message}")]
    TraceMismatch { layer: usize, message: String },
}

impl PipelineError {
    fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// How a layer aggregates its option thoughts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AggregationMetric {
    /// Positive on every thought.
    All,
    /// Positive on at least `k` thoughts.
    AtLeastK(usize),
    /// ≻-maximal documents under the layer's comparator.
    LocallyBetter,
    /// Most passed (binary) thoughts.
    MaxCount,
    /// Largest weighted sum.
    MaxWeight,
    /// Every input ordered by passed-thought count; optionally truncated.
    RankCount {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        top: Option<usize>,
    },
    /// Every input ordered by weighted sum; optionally truncated.
    RankWeight {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        top: Option<usize>,
    },
}

impl AggregationMetric {
    pub fn is_filter(self) -> bool {
        matches!(self, Self::All | Self::AtLeastK(_))
    }

    pub fn is_selection(self) -> bool {
        matches!(self, Self::LocallyBetter | Self::MaxCount | Self::MaxWeight)
    }

    pub fn is_rank(self) -> bool {
        matches!(self, Self::RankCount { .. } | Self::RankWeight { .. })
    }

    fn counts(self) -> bool {
        matches!(self, Self::MaxCount | Self::RankCount { .. })
    }
}

/// Alternative criteria to try when a layer keeps nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefinementBinding {
    /// Attempt `n` uses `alternatives[n - 1]` as the layer's levels.
    Static { alternatives: Vec<Vec<Vec<OptionThought>>> },
    /// The chat model rewrites every criterion into a looser one.
    Chat { model: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSpec {
    /// Refinement attempts allowed after the first try.
    #[serde(default = "default_budget")]
    pub budget: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hook: Option<RefinementBinding>,
}

fn default_budget() -> u32 {
    1
}

impl Default for RefineSpec {
    fn default() -> Self {
        Self {
            budget: default_budget(),
            hook: None,
        }
    }
}

/// One layer of a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    /// Thought lists per level, strongest first.
    pub levels: Vec<Vec<OptionThought>>,
    pub metric: AggregationMetric,
    /// Overrides the metric's default comparator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<ComparatorSpec>,
    #[serde(default)]
    pub refine: RefineSpec,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, levels: Vec<Vec<OptionThought>>, metric: AggregationMetric) -> Self {
        Self {
            name: name.into(),
            levels,
            metric,
            comparator: None,
            refine: RefineSpec::default(),
        }
    }

    pub fn with_comparator(mut self, comparator: ComparatorSpec) -> Self {
        self.comparator = Some(comparator);
        self
    }

    pub fn with_refine(mut self, refine: RefineSpec) -> Self {
        self.refine = refine;
        self
    }

    pub fn thoughts(&self) -> impl Iterator<Item = &OptionThought> {
        self.levels.iter().flatten()
    }

    /// Comparator the layer's levels are compared with; `None` for filter layers.
    pub fn effective_comparator(&self) -> Option<ComparatorSpec> {
        match self.metric {
            AggregationMetric::All | AggregationMetric::AtLeastK(_) => None,
            AggregationMetric::MaxCount | AggregationMetric::RankCount { .. } => {
                Some(ComparatorSpec::global(Aggregator::WeightedSum))
            }
            AggregationMetric::LocallyBetter => Some(self.comparator.unwrap_or(ComparatorSpec::Local)),
            AggregationMetric::MaxWeight | AggregationMetric::RankWeight { .. } => {
                Some(self.comparator.unwrap_or(ComparatorSpec::global(Aggregator::WeightedSum)))
            }
        }
    }

    /// The layer's levels as hierarchy slots; empty for filter layers.
    ///
    /// Count metrics compare unit-weight copies of the thoughts.
    pub fn slots(&self) -> Result<Vec<Slot>, PipelineError> {
        let Some(comparator) = self.effective_comparator() else {
            return Ok(Vec::new());
        };
        self.levels
            .iter()
            .map(|level| {
                let thoughts = if self.metric.counts() {
                    level.iter().map(|t| t.clone().with_weight(1.0)).collect()
                } else {
                    level.clone()
                };
                Slot::new(thoughts, comparator).map_err(PipelineError::from)
            })
            .collect()
    }

    /// Copy with thoughts stamped as layer `index`, levels numbered from 1.
    pub fn stamped(&self, index: u32) -> LayerSpec {
        let mut layer = self.clone();
        for (j, level) in layer.levels.iter_mut().enumerate() {
            for thought in level {
                thought.layer = index;
                thought.level = j as u32 + 1;
            }
        }
        layer
    }

    /// Checks metric, comparator and level constraints; `path` prefixes error locations.
    pub fn validate(&self, path: &str) -> Result<(), PipelineError> {
        if self.levels.is_empty() {
            return Err(PipelineError::config(format!("{path}.levels"), "a layer needs at least one level"));
        }
        for (j, level) in self.levels.iter().enumerate() {
            if level.is_empty() {
                return Err(PipelineError::config(format!("{path}.levels[{j}]"), "levels must not be empty"));
            }
        }
        let count = self.thoughts().count();
        match self.metric {
            AggregationMetric::AtLeastK(k) if k == 0 || k > count => {
                return Err(PipelineError::config(
                    format!("{path}.metric"),
                    format!("at_least_k needs 1 <= k <= {count}, got {k}"),
                ));
            }
            AggregationMetric::RankCount { top: Some(0) } | AggregationMetric::RankWeight { top: Some(0) } => {
                return Err(PipelineError::config(format!("{path}.metric.top"), "top must be at least 1"));
            }
            _ => {}
        }
        if self.metric.counts() {
            if let Some(t) = self.thoughts().find(|t| !t.binary) {
                return Err(PipelineError::config(
                    format!("{path}.metric"),
                    format!("count metrics need binary thoughts, but `{}` is not binary", t.id),
                ));
            }
        }
        match (self.metric, self.comparator) {
            (_, None) | (AggregationMetric::LocallyBetter, Some(_)) => {}
            (AggregationMetric::MaxWeight | AggregationMetric::RankWeight { .. }, Some(ComparatorSpec::Global { .. })) => {}
            (metric, Some(_)) => {
                return Err(PipelineError::config(
                    format!("{path}.comparator"),
                    format!("metric {metric:?} does not accept this comparator"),
                ));
            }
        }
        self.slots().map_err(|e| PipelineError::config(path.to_owned(), e.to_string()))?;
        Ok(())
    }
}

/// A validated layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub layers: Vec<LayerSpec>,
    /// Depth bound of the terminal ranking; every survivor when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

impl PipelineSpec {
    /// Stamps layer and level indices from positions and validates the stack.
    pub fn new(layers: Vec<LayerSpec>, top_k: Option<usize>) -> Result<Self, PipelineError> {
        let spec = Self {
            layers: layers.iter().enumerate().map(|(i, l)| l.stamped(i as u32 + 1)).collect(),
            top_k,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.layers.is_empty() {
            return Err(PipelineError::config("layers", "a pipeline needs at least one layer"));
        }
        if self.top_k == Some(0) {
            return Err(PipelineError::config("top_k", "top_k must be at least 1"));
        }
        let mut seen: HashSet<&ThoughtId> = HashSet::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let path = format!("layers[{i}]");
            layer.validate(&path)?;
            for (j, level) in layer.levels.iter().enumerate() {
                for thought in level {
                    if (thought.layer, thought.level) != (i as u32 + 1, j as u32 + 1) {
                        return Err(PipelineError::config(
                            format!("{path}.levels[{j}]"),
                            format!("thought `{}` is stamped for another position", thought.id),
                        ));
                    }
                }
            }
            let alternatives = match &layer.refine.hook {
                Some(RefinementBinding::Static { alternatives }) => alternatives.as_slice(),
                _ => &[],
            };
            let all = layer.thoughts().chain(alternatives.iter().flatten().flatten());
            for thought in all {
                if !seen.insert(&thought.id) {
                    return Err(PipelineError::config(
                        path.clone(),
                        format!("thought id `{}` is used more than once", thought.id),
                    ));
                }
            }
            for (a, alternative) in alternatives.iter().enumerate() {
                let candidate = LayerSpec {
                    levels: alternative.clone(),
                    ..layer.clone()
                }
                .stamped(i as u32 + 1);
                candidate.validate(&format!("{path}.refine.hook.alternatives[{a}]"))?;
            }
        }
        Ok(())
    }

    /// Slots contributed by every comparator layer, in order.
    pub fn comparator_slots(&self) -> Result<Vec<Slot>, PipelineError> {
        let mut slots = Vec::new();
        for layer in &self.layers {
            slots.extend(layer.slots()?);
        }
        Ok(slots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(id: &str) -> OptionThought {
        OptionThought::new(ThoughtId::new(id).unwrap(), 0, 0)
    }

    #[test]
    fn metric_serde_forms() {
        let cases = [
            (r#""all""#, AggregationMetric::All),
            (r#"{"at_least_k":2}"#, AggregationMetric::AtLeastK(2)),
            (r#"{"rank_weight":{"top":10}}"#, AggregationMetric::RankWeight { top: Some(10) }),
            (r#"{"rank_count":{}}"#, AggregationMetric::RankCount { top: None }),
        ];
        for (json, metric) in cases {
            assert_eq!(serde_json::from_str::<AggregationMetric>(json).unwrap(), metric);
        }
        assert!(serde_json::from_str::<AggregationMetric>(r#"{"rank_weight":{"top":1,"x":2}}"#).is_err());
    }

    #[test]
    fn positions_are_stamped() {
        let spec = PipelineSpec::new(
            vec![
                LayerSpec::new("a", vec![vec![t("x")]], AggregationMetric::All),
                LayerSpec::new("b", vec![vec![t("y")], vec![t("z")]], AggregationMetric::LocallyBetter),
            ],
            None,
        )
        .unwrap();
        let z = &spec.layers[1].levels[1][0];
        assert_eq!((z.layer, z.level), (2, 2));
        assert_eq!(spec.comparator_slots().unwrap().len(), 2);
    }

    #[test]
    fn invalid_stacks_are_rejected_with_paths() {
        let err = PipelineSpec::new(vec![LayerSpec::new("a", vec![vec![t("x")]], AggregationMetric::AtLeastK(2))], None).unwrap_err();
        assert!(matches!(err, PipelineError::Config { ref path, .. } if path == "layers[0].metric"), "{err}");

        let err = PipelineSpec::new(vec![LayerSpec::new("a", vec![vec![t("x")]], AggregationMetric::MaxCount)], None).unwrap_err();
        assert!(err.to_string().contains("binary"));

        let dup = vec![
            LayerSpec::new("a", vec![vec![t("x")]], AggregationMetric::All),
            LayerSpec::new("b", vec![vec![t("x")]], AggregationMetric::All),
        ];
        assert!(PipelineSpec::new(dup, None).is_err());

        let filtered = LayerSpec::new("a", vec![vec![t("x")]], AggregationMetric::All).with_comparator(ComparatorSpec::Local);
        assert!(PipelineSpec::new(vec![filtered], None).is_err());

        assert!(PipelineSpec::new(vec![LayerSpec::new("a", vec![vec![]], AggregationMetric::All)], None).is_err());
        assert!(PipelineSpec::new(vec![], None).is_err());
    }

    #[test]
    fn count_slots_use_unit_weights() {
        let layer = LayerSpec::new("a", vec![vec![t("x").with_weight(5.0).with_binary(true)]], AggregationMetric::MaxCount).stamped(1);
        let slots = layer.slots().unwrap();
        assert_eq!(slots[0].thoughts()[0].weight, 1.0);
    }
}
