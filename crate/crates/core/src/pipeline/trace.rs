use serde::{Deserialize, Serialize};

use super::{apply_metric, AggregationMetric, LayerSpec, PipelineError, RankEntry, RefineSpec};
use crate::hierarchy::{ComparatorSpec, DocumentId, Hierarchy, OptionThought, ScoreMatrix, Slot, ThoughtId};
use crate::ranking::{top_k, RankedOutput};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedThought {
    pub id: ThoughtId,
    pub criterion: String,
}

/// A retry of a layer with revised criteria after it kept nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktrackEvent {
    /// 1 for the first refinement.
    pub attempt: u32,
    pub thoughts: Vec<RefinedThought>,
}

/// Everything needed to re-derive one layer's survivors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// 1-based position in the executed stack.
    pub index: usize,
    pub name: String,
    pub metric: AggregationMetric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator: Option<ComparatorSpec>,
    /// Levels of the final attempt.
    pub levels: Vec<Vec<OptionThought>>,
    pub inputs: Vec<DocumentId>,
    /// Scores of every input on the final attempt's thoughts.
    pub scores: ScoreMatrix,
    pub survivors: Vec<DocumentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<RankEntry>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backtracks: Vec<BacktrackEvent>,
    /// The layer kept nothing and no refinement was left to try.
    #[serde(default)]
    pub exhausted: bool,
}

impl LayerRecord {
    /// The layer as it was finally applied.
    pub fn layer_spec(&self) -> LayerSpec {
        LayerSpec {
            name: self.name.clone(),
            levels: self.levels.clone(),
            metric: self.metric,
            comparator: self.comparator,
            refine: RefineSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub query: String,
    pub layers: Vec<LayerRecord>,
    /// Terminal ranking; absent when the run aborted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<RankedOutput>,
}

impl PipelineTrace {
    /// Hierarchy built from every recorded comparator layer.
    pub fn hierarchy(&self) -> Result<Hierarchy, PipelineError> {
        let mut slots = Vec::new();
        for record in &self.layers {
            slots.extend(record.layer_spec().slots()?);
        }
        Ok(Hierarchy::new(slots)?)
    }

    /// Every recorded score.
    pub fn matrix(&self) -> ScoreMatrix {
        let mut matrix = ScoreMatrix::new();
        for record in &self.layers {
            matrix.merge(&record.scores);
        }
        matrix
    }

    /// Thoughts of filter layers, which never enter the hierarchy.
    pub fn hard_thoughts(&self) -> Vec<OptionThought> {
        self.layers
            .iter()
            .filter(|r| r.metric.is_filter())
            .flat_map(|r| r.levels.iter().flatten().cloned())
            .collect()
    }

    /// Slots contributed by the layers before position `index` (1-based).
    pub fn slots_before(&self, index: usize) -> Result<Vec<Slot>, PipelineError> {
        let mut slots = Vec::new();
        for record in self.layers.iter().take(index.saturating_sub(1)) {
            slots.extend(record.layer_spec().slots()?);
        }
        Ok(slots)
    }
}

/// Re-applies every recorded metric to its recorded inputs and scores.
pub fn replay_trace(trace: &PipelineTrace) -> Result<Vec<Vec<DocumentId>>, PipelineError> {
    let mut prior: Vec<Slot> = Vec::new();
    let mut survivors = Vec::with_capacity(trace.layers.len());
    for record in &trace.layers {
        let layer = record.layer_spec();
        let (kept, _) = apply_metric(&prior, &record.inputs, &record.scores_with_history(trace), &layer)?;
        survivors.push(kept);
        prior.extend(layer.slots()?);
    }
    Ok(survivors)
}

impl LayerRecord {
    /// Selection layers compare under earlier slots too, so they need earlier scores.
    fn scores_with_history(&self, trace: &PipelineTrace) -> ScoreMatrix {
        if !self.metric.is_selection() {
            return self.scores.clone();
        }
        let mut matrix = ScoreMatrix::new();
        for record in trace.layers.iter().take(self.index) {
            matrix.merge(&record.scores.slice(&self.inputs, &record.levels.iter().flatten().collect::<Vec<_>>()));
        }
        matrix
    }
}

/// Checks chaining, per-layer survivors and the terminal ranking against a replay.
pub fn verify_trace(trace: &PipelineTrace) -> Result<(), PipelineError> {
    for pair in trace.layers.windows(2) {
        if pair[0].survivors != pair[1].inputs {
            return Err(PipelineError::TraceMismatch {
                layer: pair[1].index,
                message: "inputs differ from the previous layer's survivors".into(),
            });
        }
    }
    let replayed = replay_trace(trace)?;
    for (record, kept) in trace.layers.iter().zip(&replayed) {
        if &record.survivors != kept {
            return Err(PipelineError::TraceMismatch {
                layer: record.index,
                message: format!("recorded {:?}, replayed {:?}", record.survivors, kept),
            });
        }
    }
    if let (Some(output), Some(last)) = (&trace.output, trace.layers.last()) {
        let again = top_k(&last.survivors, &trace.matrix(), &trace.hierarchy()?, output.k)?;
        if &again != output {
            return Err(PipelineError::TraceMismatch {
                layer: last.index,
                message: "terminal ranking differs".into(),
            });
        }
    }
    Ok(())
}
