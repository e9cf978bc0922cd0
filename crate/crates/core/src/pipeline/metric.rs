use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{AggregationMetric, LayerSpec, PipelineError};
use crate::hierarchy::{aggregate_slot, ComparatorSpec, DocumentId, ScoreMatrix, Slot};
use crate::ranking::{hard_filter, maximal_over, HardMode};

/// A rank-layer document with its per-level aggregates, strongest level first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: DocumentId,
    pub scores: Vec<f64>,
}

fn check_counts(docs: &[DocumentId], matrix: &ScoreMatrix, layer: &LayerSpec) -> Result<(), PipelineError> {
    if !matches!(layer.metric, AggregationMetric::MaxCount | AggregationMetric::RankCount { .. }) {
        return Ok(());
    }
    for thought in layer.thoughts() {
        if !thought.binary {
            return Err(PipelineError::Contract(format!(
                "layer `{}` counts passed thoughts, but thought `{}` is not binary",
                layer.name, thought.id
            )));
        }
        for doc in docs {
            let score = matrix.score(doc, &thought.id)?;
            if score != 0.0 && score != 1.0 {
                return Err(PipelineError::Contract(format!(
                    "binary thought `{}` has score {score} for document `{doc}`",
                    thought.id
                )));
            }
        }
    }
    Ok(())
}

/// All / AtLeastK over every thought of the layer, levels ignored. Keeps input order.
pub fn apply_filter_metric(docs: &[DocumentId], matrix: &ScoreMatrix, layer: &LayerSpec) -> Result<Vec<DocumentId>, PipelineError> {
    let mode = match layer.metric {
        AggregationMetric::All => HardMode::All,
        AggregationMetric::AtLeastK(k) => HardMode::AtLeast(k),
        other => {
            return Err(PipelineError::Contract(format!("{other:?} is not a filter metric")));
        }
    };
    let thoughts: Vec<_> = layer.thoughts().cloned().collect();
    Ok(hard_filter(docs, matrix, &thoughts, mode)?)
}

/// ≻-maximal documents under the layer's own levels.
pub fn apply_optimal_metric(docs: &[DocumentId], matrix: &ScoreMatrix, layer: &LayerSpec) -> Result<Vec<DocumentId>, PipelineError> {
    apply_optimal_metric_within(&[], docs, matrix, layer)
}

/// ≻-maximal documents under `prior` followed by the layer's levels.
///
/// Weaker levels only separate documents that every stronger slot leaves
/// equivalent. Keeps input order.
pub fn apply_optimal_metric_within(
    prior: &[Slot],
    docs: &[DocumentId],
    matrix: &ScoreMatrix,
    layer: &LayerSpec,
) -> Result<Vec<DocumentId>, PipelineError> {
    if !layer.metric.is_selection() {
        return Err(PipelineError::Contract(format!("{:?} is not a selection metric", layer.metric)));
    }
    check_counts(docs, matrix, layer)?;
    let mut slots = prior.to_vec();
    slots.extend(layer.slots()?);
    Ok(maximal_over(docs, matrix, &slots)?)
}

/// Orders every input by its per-level aggregates, highest first, and keeps the best `top`.
///
/// Ties keep input order.
pub fn apply_rank_metric(docs: &[DocumentId], matrix: &ScoreMatrix, layer: &LayerSpec) -> Result<Vec<RankEntry>, PipelineError> {
    let top = match layer.metric {
        AggregationMetric::RankCount { top } | AggregationMetric::RankWeight { top } => top,
        other => return Err(PipelineError::Contract(format!("{other:?} is not a rank metric"))),
    };
    check_counts(docs, matrix, layer)?;
    let aggregator = match layer.effective_comparator() {
        Some(ComparatorSpec::Global { aggregator, .. }) => aggregator,
        _ => {
            return Err(PipelineError::Contract(format!(
                "rank layer `{}` needs a global comparator",
                layer.name
            )))
        }
    };
    let slots = layer.slots()?;
    let mut entries = docs
        .iter()
        .map(|doc| {
            let scores = slots
                .iter()
                .map(|slot| aggregate_slot(matrix, doc, slot.thoughts(), aggregator))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RankEntry { id: doc.clone(), scores })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    entries.sort_by(|a, b| descending(&a.scores, &b.scores));
    if let Some(top) = top {
        entries.truncate(top);
    }
    Ok(entries)
}

fn descending(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| y.total_cmp(x))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Applies any metric; selection metrics compare under `prior` first.
pub fn apply_metric(
    prior: &[Slot],
    docs: &[DocumentId],
    matrix: &ScoreMatrix,
    layer: &LayerSpec,
) -> Result<(Vec<DocumentId>, Option<Vec<RankEntry>>), PipelineError> {
    let metric = layer.metric;
    if metric.is_filter() {
        Ok((apply_filter_metric(docs, matrix, layer)?, None))
    } else if metric.is_selection() {
        Ok((apply_optimal_metric_within(prior, docs, matrix, layer)?, None))
    } else {
        let ranked = apply_rank_metric(docs, matrix, layer)?;
        Ok((ranked.iter().map(|e| e.id.clone()).collect(), Some(ranked)))
    }
}
