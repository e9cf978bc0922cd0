use super::{LayerRecord, LayerSpec, PipelineError};
use crate::hierarchy::{DocumentId, OptionThought, ThoughtId};
use crate::providers::chat::refine_criteria;
use crate::providers::{ChatClient, ProviderError};

/// Produces revised criteria for a layer that kept no document.
pub trait RefinementHook: Send + Sync {
    /// Levels for refinement attempt `attempt` (from 1), given the layer as last tried.
    /// `None` means the hook has nothing further to offer.
    fn refine(&self, layer: &LayerSpec, attempt: u32, query: &str) -> Result<Option<Vec<Vec<OptionThought>>>, ProviderError>;
}

/// Replays a fixed list of alternative level sets.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRefinement {
    pub alternatives: Vec<Vec<Vec<OptionThought>>>,
}

impl RefinementHook for StaticRefinement {
    fn refine(&self, _: &LayerSpec, attempt: u32, _: &str) -> Result<Option<Vec<Vec<OptionThought>>>, ProviderError> {
        Ok(attempt
            .checked_sub(1)
            .and_then(|i| self.alternatives.get(i as usize))
            .cloned())
    }
}

/// Asks a chat model to loosen every criterion of the layer.
///
/// Rewritten thoughts keep their provider and weight; their ids become
/// `{original}~r{attempt}` so cached scores are never reused.
#[derive(Debug)]
pub struct ChatRefinement<'a> {
    pub client: &'a ChatClient,
    pub model: String,
}

fn base_id(id: &ThoughtId) -> &str {
    id.as_str().split_once("~r").map_or(id.as_str(), |(base, _)| base)
}

impl RefinementHook for ChatRefinement<'_> {
    fn refine(&self, layer: &LayerSpec, attempt: u32, query: &str) -> Result<Option<Vec<Vec<OptionThought>>>, ProviderError> {
        let criteria: Vec<String> = layer
            .thoughts()
            .map(|t| if t.criterion.is_empty() { t.id.to_string() } else { t.criterion.clone() })
            .collect();
        let mut rewritten = refine_criteria(self.client, &self.model, query, &criteria)?.into_iter();
        let levels = layer
            .levels
            .iter()
            .map(|level| {
                level
                    .iter()
                    .map(|t| {
                        let id = ThoughtId::new(format!("{}~r{attempt}", base_id(&t.id))).expect("non-empty id");
                        let mut thought = t.clone();
                        thought.id = id;
                        thought.criterion = rewritten.next().expect("one criterion per thought");
                        thought
                    })
                    .collect()
            })
            .collect();
        Ok(Some(levels))
    }
}

/// Appends layers while a pipeline runs. Disabled unless supplied in the run options.
pub trait ExpansionHook: Send + Sync {
    /// Layers to run right after `completed`, in order.
    fn expand(&self, completed: &LayerRecord, survivors: &[DocumentId]) -> Result<Vec<LayerSpec>, PipelineError>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::AggregationMetric;

    #[test]
    fn static_alternatives_are_consumed_in_order() {
        let alt = |id: &str| vec![vec![OptionThought::new(ThoughtId::new(id).unwrap(), 1, 1)]];
        let hook = StaticRefinement {
            alternatives: vec![alt("x"), alt("y")],
        };
        let layer = LayerSpec::new("L", alt("w"), AggregationMetric::All);
        assert_eq!(hook.refine(&layer, 1, "q").unwrap(), Some(alt("x")));
        assert_eq!(hook.refine(&layer, 2, "q").unwrap(), Some(alt("y")));
        assert_eq!(hook.refine(&layer, 3, "q").unwrap(), None);
    }

    #[test]
    fn refined_ids_strip_earlier_suffixes() {
        assert_eq!(base_id(&ThoughtId::new("kw~r2").unwrap()), "kw");
        assert_eq!(base_id(&ThoughtId::new("kw").unwrap()), "kw");
    }
}
