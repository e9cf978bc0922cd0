//! Constraint-hierarchy comparison over scored documents.
//!
//! Every score is a merit: higher means more relevant. A [`Hierarchy`] is an
//! ordered list of [`Slot`]s (strongest first), each a set of option thoughts
//! compared with its own [`ComparatorSpec`]. Comparing two documents walks the
//! slots in order and stops at the first slot where they are not equivalent.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::ProviderBinding;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("identifier must be a non-empty string")]
    EmptyId,
    #[error("score matrix has no entry for document `{doc}` and thought `{thought}`")]
    IncompleteMatrix { doc: DocumentId, thought: ThoughtId },
    #[error("score {score} for document `{doc}` and thought `{thought}` is not a finite non-negative number")]
    InvalidScore {
        doc: DocumentId,
        thought: ThoughtId,
        score: f64,
    },
    #[error("thought `{thought}` is binary but document `{doc}` scored {score}")]
    NonBinaryScore {
        doc: DocumentId,
        thought: ThoughtId,
        score: f64,
    },
    #[error("thought `{0}` appears more than once in the hierarchy")]
    DuplicateThought(ThoughtId),
    #[error("layer {layer} level {level} has no option thoughts")]
    EmptyLevel { layer: u32, level: u32 },
    #[error("thought `{thought}` has invalid weight {weight}")]
    InvalidWeight { thought: ThoughtId, weight: f64 },
    #[error("thought `{thought}` is placed at layer {found_layer} level {found_level} but listed under layer {layer} level {level}")]
    Misplaced {
        thought: ThoughtId,
        layer: u32,
        level: u32,
        found_layer: u32,
        found_level: u32,
    },
    #[error("slot for layer {layer} level {level} is out of layer-major, level-minor order")]
    OutOfOrder { layer: u32, level: u32 },
    #[error("comparator tolerance {0} must be finite and non-negative")]
    InvalidTolerance(f64),
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Result<Self, HierarchyError> {
                let value = value.into();
                if value.is_empty() {
                    return Err(HierarchyError::EmptyId);
                }
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = HierarchyError;

            fn try_from(value: String) -> Result<Self, Self::Error> {
                Self::new(value)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Identifier of a corpus document. Unique within a corpus.
    DocumentId
);
string_id!(
    /// Identifier of an option thought. Unique within a hierarchy.
    ThoughtId
);

/// One criterion evaluated against every candidate document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionThought {
    pub id: ThoughtId,
    /// 1-based layer index.
    pub layer: u32,
    /// 1-based level within the layer; 1 is the strongest.
    pub level: u32,
    pub weight: f64,
    #[serde(default)]
    pub criterion: String,
    #[serde(default)]
    pub binary: bool,
    #[serde(default)]
    pub provider: ProviderBinding,
}

impl OptionThought {
    /// A unit-weight, non-binary thought backed by the score table.
    pub fn new(id: ThoughtId, layer: u32, level: u32) -> Self {
        Self {
            id,
            layer,
            level,
            weight: 1.0,
            criterion: String::new(),
            binary: false,
            provider: ProviderBinding::default(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_criterion(mut self, criterion: impl Into<String>) -> Self {
        self.criterion = criterion.into();
        self
    }

    pub fn with_binary(mut self, binary: bool) -> Self {
        self.binary = binary;
        self
    }

    pub fn with_provider(mut self, provider: ProviderBinding) -> Self {
        self.provider = provider;
        self
    }
}

/// Relevance scores ρ(d, t), keyed by document then thought.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<DocumentId, BTreeMap<ThoughtId, f64>>")]
#[serde(into = "BTreeMap<DocumentId, BTreeMap<ThoughtId, f64>>")]
pub struct ScoreMatrix {
    rows: BTreeMap<DocumentId, BTreeMap<ThoughtId, f64>>,
}

impl ScoreMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a score, rejecting negative and non-finite values.
    pub fn insert(&mut self, doc: DocumentId, thought: ThoughtId, score: f64) -> Result<(), HierarchyError> {
        if !score.is_finite() || score < 0.0 {
            return Err(HierarchyError::InvalidScore { doc, thought, score });
        }
        self.rows.entry(doc).or_default().insert(thought, score);
        Ok(())
    }

    /// Like [`insert`](Self::insert) but also enforces the thought's binary flag.
    pub fn insert_for(&mut self, doc: DocumentId, thought: &OptionThought, score: f64) -> Result<(), HierarchyError> {
        if thought.binary && score != 0.0 && score != 1.0 {
            return Err(HierarchyError::NonBinaryScore {
                doc,
                thought: thought.id.clone(),
                score,
            });
        }
        self.insert(doc, thought.id.clone(), score)
    }

    pub fn get(&self, doc: &DocumentId, thought: &ThoughtId) -> Option<f64> {
        self.rows.get(doc).and_then(|row| row.get(thought)).copied()
    }

    pub fn score(&self, doc: &DocumentId, thought: &ThoughtId) -> Result<f64, HierarchyError> {
        self.get(doc, thought).ok_or_else(|| HierarchyError::IncompleteMatrix {
            doc: doc.clone(),
            thought: thought.clone(),
        })
    }

    pub fn contains(&self, doc: &DocumentId, thought: &ThoughtId) -> bool {
        self.get(doc, thought).is_some()
    }

    pub fn row(&self, doc: &DocumentId) -> Option<&BTreeMap<ThoughtId, f64>> {
        self.rows.get(doc)
    }

    pub fn documents(&self) -> impl Iterator<Item = &DocumentId> {
        self.rows.keys()
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copies the entries for `docs` × `thoughts` that are present.
    pub fn slice<'a>(
        &self,
        docs: impl IntoIterator<Item = &'a DocumentId>,
        thoughts: &[&OptionThought],
    ) -> ScoreMatrix {
        let mut out = ScoreMatrix::new();
        for doc in docs {
            for thought in thoughts {
                if let Some(score) = self.get(doc, &thought.id) {
                    out.rows.entry(doc.clone()).or_default().insert(thought.id.clone(), score);
                }
            }
        }
        out
    }

    /// Adds every entry of `other`, overwriting on key collision.
    pub fn merge(&mut self, other: &ScoreMatrix) {
        for (doc, row) in &other.rows {
            let target = self.rows.entry(doc.clone()).or_default();
            for (thought, score) in row {
                target.insert(thought.clone(), *score);
            }
        }
    }
}

impl TryFrom<BTreeMap<DocumentId, BTreeMap<ThoughtId, f64>>> for ScoreMatrix {
    type Error = HierarchyError;

    fn try_from(rows: BTreeMap<DocumentId, BTreeMap<ThoughtId, f64>>) -> Result<Self, Self::Error> {
        let mut matrix = ScoreMatrix::new();
        for (doc, row) in rows {
            for (thought, score) in row {
                matrix.insert(doc.clone(), thought, score)?;
            }
        }
        Ok(matrix)
    }
}

impl From<ScoreMatrix> for BTreeMap<DocumentId, BTreeMap<ThoughtId, f64>> {
    fn from(matrix: ScoreMatrix) -> Self {
        matrix.rows
    }
}

/// Outcome of comparing `a` against `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialOrdering {
    Better,
    Worse,
    Equivalent,
    Incomparable,
}

impl PartialOrdering {
    /// The outcome with the arguments swapped.
    pub fn reverse(self) -> Self {
        match self {
            Self::Better => Self::Worse,
            Self::Worse => Self::Better,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    /// Σ w·ρ
    WeightedSum,
    /// min w·ρ, the merit-side dual of the worst weighted error.
    WorstCase,
    /// Σ w·ρ²
    LeastSquares,
}

/// How one slot compares two documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorSpec {
    /// Componentwise dominance; generally not total.
    Local,
    /// Numeric comparison of an aggregate; always total.
    Global {
        aggregator: Aggregator,
        /// Aggregates closer than this are equivalent. Zero means exact equality.
        #[serde(default, skip_serializing_if = "is_zero")]
        tolerance: f64,
    },
}

fn is_zero(value: &f64) -> bool {
    *value == 0.0
}

impl ComparatorSpec {
    pub fn global(aggregator: Aggregator) -> Self {
        Self::Global {
            aggregator,
            tolerance: 0.0,
        }
    }

    pub fn is_total(&self) -> bool {
        matches!(self, Self::Global { .. })
    }

    fn validate(&self) -> Result<(), HierarchyError> {
        if let Self::Global { tolerance, .. } = self {
            if !tolerance.is_finite() || *tolerance < 0.0 {
                return Err(HierarchyError::InvalidTolerance(*tolerance));
            }
        }
        Ok(())
    }
}

/// A non-empty thought set compared as one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    thoughts: Vec<OptionThought>,
    comparator: ComparatorSpec,
}

impl Slot {
    pub fn new(thoughts: Vec<OptionThought>, comparator: ComparatorSpec) -> Result<Self, HierarchyError> {
        let Some(first) = thoughts.first() else {
            return Err(HierarchyError::EmptyLevel { layer: 0, level: 0 });
        };
        let (layer, level) = (first.layer, first.level);
        for thought in &thoughts {
            if thought.layer != layer || thought.level != level {
                return Err(HierarchyError::Misplaced {
                    thought: thought.id.clone(),
                    layer,
                    level,
                    found_layer: thought.layer,
                    found_level: thought.level,
                });
            }
            if !thought.weight.is_finite() || thought.weight < 0.0 {
                return Err(HierarchyError::InvalidWeight {
                    thought: thought.id.clone(),
                    weight: thought.weight,
                });
            }
        }
        comparator.validate()?;
        Ok(Self { thoughts, comparator })
    }

    pub fn thoughts(&self) -> &[OptionThought] {
        &self.thoughts
    }

    pub fn comparator(&self) -> &ComparatorSpec {
        &self.comparator
    }

    /// (layer, level) shared by every thought in the slot.
    pub fn position(&self) -> (u32, u32) {
        (self.thoughts[0].layer, self.thoughts[0].level)
    }
}

/// The flattened hierarchy ⟨T¹₁, …, T¹ₘ₁, …, Tⁿ₁, …, Tⁿₘₙ⟩.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Slot>", into = "Vec<Slot>")]
pub struct Hierarchy {
    slots: Vec<Slot>,
}

impl Hierarchy {
    /// Validates slot order (layer-major, level-minor, strictly ascending) and
    /// thought-id uniqueness.
    pub fn new(slots: Vec<Slot>) -> Result<Self, HierarchyError> {
        let mut seen = HashSet::new();
        let mut previous: Option<(u32, u32)> = None;
        for slot in &slots {
            let position = slot.position();
            if previous.is_some_and(|prev| prev >= position) {
                return Err(HierarchyError::OutOfOrder {
                    layer: position.0,
                    level: position.1,
                });
            }
            previous = Some(position);
            for thought in &slot.thoughts {
                if !seen.insert(thought.id.clone()) {
                    return Err(HierarchyError::DuplicateThought(thought.id.clone()));
                }
            }
        }
        Ok(Self { slots })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn thoughts(&self) -> impl Iterator<Item = &OptionThought> {
        self.slots.iter().flat_map(|slot| slot.thoughts.iter())
    }

    /// The hierarchy made of the strongest `len` slots.
    pub fn prefix(&self, len: usize) -> Hierarchy {
        Hierarchy {
            slots: self.slots[..len.min(self.slots.len())].to_vec(),
        }
    }
}

impl TryFrom<Vec<Slot>> for Hierarchy {
    type Error = HierarchyError;

    fn try_from(slots: Vec<Slot>) -> Result<Self, Self::Error> {
        for slot in &slots {
            Slot::new(slot.thoughts.clone(), slot.comparator)?;
        }
        Hierarchy::new(slots)
    }
}

impl From<Hierarchy> for Vec<Slot> {
    fn from(hierarchy: Hierarchy) -> Self {
        hierarchy.slots
    }
}

/// Aggregated merit of `doc` over `thoughts`.
pub fn aggregate_slot(
    matrix: &ScoreMatrix,
    doc: &DocumentId,
    thoughts: &[OptionThought],
    aggregator: Aggregator,
) -> Result<f64, HierarchyError> {
    let mut weighted = thoughts
        .iter()
        .map(|t| matrix.score(doc, &t.id).map(|score| (t.weight, score)));
    match aggregator {
        Aggregator::WeightedSum => weighted.try_fold(0.0, |acc, ws| ws.map(|(w, s)| acc + w * s)),
        Aggregator::LeastSquares => weighted.try_fold(0.0, |acc, ws| ws.map(|(w, s)| acc + w * s * s)),
        Aggregator::WorstCase => {
            let mut worst: Option<f64> = None;
            for ws in weighted {
                let (w, s) = ws?;
                let value = w * s;
                worst = Some(worst.map_or(value, |current| current.min(value)));
            }
            Ok(worst.unwrap_or(0.0))
        }
    }
}

/// Compares `a` against `b` using one level.
pub fn level_compare(
    matrix: &ScoreMatrix,
    a: &DocumentId,
    b: &DocumentId,
    thoughts: &[OptionThought],
    spec: &ComparatorSpec,
) -> Result<PartialOrdering, HierarchyError> {
    match *spec {
        ComparatorSpec::Local => {
            let mut a_ahead = false;
            let mut b_ahead = false;
            for thought in thoughts {
                let sa = matrix.score(a, &thought.id)?;
                let sb = matrix.score(b, &thought.id)?;
                if sa > sb {
                    a_ahead = true;
                } else if sb > sa {
                    b_ahead = true;
                }
            }
            Ok(match (a_ahead, b_ahead) {
                (false, false) => PartialOrdering::Equivalent,
                (true, false) => PartialOrdering::Better,
                (false, true) => PartialOrdering::Worse,
                (true, true) => PartialOrdering::Incomparable,
            })
        }
        ComparatorSpec::Global { aggregator, tolerance } => {
            let ga = aggregate_slot(matrix, a, thoughts, aggregator)?;
            let gb = aggregate_slot(matrix, b, thoughts, aggregator)?;
            Ok(if (ga - gb).abs() <= tolerance {
                PartialOrdering::Equivalent
            } else if ga > gb {
                PartialOrdering::Better
            } else {
                PartialOrdering::Worse
            })
        }
    }
}

/// Lexicographic comparison over `slots`, strongest first.
///
/// Only the slots up to the first non-equivalent one are read, so documents
/// need not be scored on weaker slots once a stronger slot decides.
pub fn compare_slots(
    matrix: &ScoreMatrix,
    a: &DocumentId,
    b: &DocumentId,
    slots: &[Slot],
) -> Result<PartialOrdering, HierarchyError> {
    if a == b {
        return Ok(PartialOrdering::Equivalent);
    }
    for slot in slots {
        match level_compare(matrix, a, b, &slot.thoughts, &slot.comparator)? {
            PartialOrdering::Equivalent => continue,
            decided => return Ok(decided),
        }
    }
    Ok(PartialOrdering::Equivalent)
}

pub fn hierarchical_compare(
    matrix: &ScoreMatrix,
    a: &DocumentId,
    b: &DocumentId,
    hierarchy: &Hierarchy,
) -> Result<PartialOrdering, HierarchyError> {
    compare_slots(matrix, a, b, &hierarchy.slots)
}

/// One layer of a nested hierarchy: its levels, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerLevels {
    pub comparator: ComparatorSpec,
    pub levels: Vec<Vec<OptionThought>>,
}

/// Flattens ⟨⟨T¹₁,…⟩,…,⟨Tⁿ₁,…⟩⟩ into a single slot sequence.
///
/// Layer `i` (0-based position) must carry thoughts stamped with layer `i+1`
/// and level `j+1` for their level position `j`.
pub fn flatten(layers: &[LayerLevels]) -> Result<Hierarchy, HierarchyError> {
    let mut slots = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        let layer_index = i as u32 + 1;
        for (j, level) in layer.levels.iter().enumerate() {
            let level_index = j as u32 + 1;
            if level.is_empty() {
                return Err(HierarchyError::EmptyLevel {
                    layer: layer_index,
                    level: level_index,
                });
            }
            for thought in level {
                if thought.layer != layer_index || thought.level != level_index {
                    return Err(HierarchyError::Misplaced {
                        thought: thought.id.clone(),
                        layer: layer_index,
                        level: level_index,
                        found_layer: thought.layer,
                        found_level: thought.level,
                    });
                }
            }
            slots.push(Slot::new(level.clone(), layer.comparator)?);
        }
    }
    Hierarchy::new(slots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str) -> DocumentId {
        DocumentId::new(id).unwrap()
    }

    fn thought(id: &str, layer: u32, level: u32) -> OptionThought {
        OptionThought::new(ThoughtId::new(id).unwrap(), layer, level)
    }

    /// Builds a matrix from rows of scores over thoughts t0, t1, ….
    fn matrix(rows: &[(&str, &[f64])]) -> ScoreMatrix {
        let mut m = ScoreMatrix::new();
        for (d, scores) in rows {
            for (i, s) in scores.iter().enumerate() {
                m.insert(doc(d), ThoughtId::new(format!("t{i}")).unwrap(), *s).unwrap();
            }
        }
        m
    }

    fn level(ids: std::ops::Range<usize>, level: u32, weights: &[f64]) -> Vec<OptionThought> {
        ids.enumerate()
            .map(|(k, i)| thought(&format!("t{i}"), 1, level).with_weight(weights.get(k).copied().unwrap_or(1.0)))
            .collect()
    }

    #[test]
    fn weighted_sum_of_zero_scores_is_zero() {
        let m = matrix(&[("a", &[0.0, 0.0])]);
        let slot = level(0..2, 1, &[1.0, 2.0]);
        assert_eq!(aggregate_slot(&m, &doc("a"), &slot, Aggregator::WeightedSum).unwrap(), 0.0);
    }

    #[test]
    fn weighted_sum_hand_value() {
        let m = matrix(&[("a", &[0.5, 0.25])]);
        let slot = level(0..2, 1, &[1.0, 2.0]);
        assert_eq!(aggregate_slot(&m, &doc("a"), &slot, Aggregator::WeightedSum).unwrap(), 1.0);
    }

    #[test]
    fn least_squares_hand_value() {
        let m = matrix(&[("a", &[3.0, 4.0])]);
        let slot = level(0..2, 1, &[1.0, 1.0]);
        assert_eq!(aggregate_slot(&m, &doc("a"), &slot, Aggregator::LeastSquares).unwrap(), 25.0);
    }

    #[test]
    fn worst_case_takes_minimum_weighted_merit() {
        let m = matrix(&[("a", &[3.0, 4.0])]);
        let slot = level(0..2, 1, &[2.0, 1.0]);
        assert_eq!(aggregate_slot(&m, &doc("a"), &slot, Aggregator::WorstCase).unwrap(), 4.0);
    }

    #[test]
    fn missing_entry_names_pair() {
        let m = matrix(&[("a", &[1.0])]);
        let slot = level(0..2, 1, &[]);
        let err = aggregate_slot(&m, &doc("a"), &slot, Aggregator::WeightedSum).unwrap_err();
        assert_eq!(
            err,
            HierarchyError::IncompleteMatrix {
                doc: doc("a"),
                thought: ThoughtId::new("t1").unwrap()
            }
        );
    }

    #[test]
    fn identical_rows_are_equivalent_under_every_spec() {
        let m = matrix(&[("a", &[2.0, 1.0]), ("b", &[2.0, 1.0])]);
        let slot = level(0..2, 1, &[]);
        let specs = [
            ComparatorSpec::Local,
            ComparatorSpec::global(Aggregator::WeightedSum),
            ComparatorSpec::global(Aggregator::WorstCase),
            ComparatorSpec::global(Aggregator::LeastSquares),
        ];
        for spec in specs {
            assert_eq!(
                level_compare(&m, &doc("a"), &doc("b"), &slot, &spec).unwrap(),
                PartialOrdering::Equivalent
            );
        }
    }

    #[test]
    fn local_crossing_rows_are_incomparable() {
        let m = matrix(&[("a", &[2.0, 1.0]), ("b", &[1.0, 2.0])]);
        let slot = level(0..2, 1, &[]);
        assert_eq!(
            level_compare(&m, &doc("a"), &doc("b"), &slot, &ComparatorSpec::Local).unwrap(),
            PartialOrdering::Incomparable
        );
    }

    #[test]
    fn global_sum_ties_crossing_rows() {
        let m = matrix(&[("a", &[2.0, 1.0]), ("b", &[1.0, 2.0])]);
        let slot = level(0..2, 1, &[]);
        let spec = ComparatorSpec::global(Aggregator::WeightedSum);
        assert_eq!(
            level_compare(&m, &doc("a"), &doc("b"), &slot, &spec).unwrap(),
            PartialOrdering::Equivalent
        );
    }

    #[test]
    fn tolerance_widens_global_ties() {
        let m = matrix(&[("a", &[1.0]), ("b", &[1.05])]);
        let slot = level(0..1, 1, &[]);
        let exact = ComparatorSpec::global(Aggregator::WeightedSum);
        let loose = ComparatorSpec::Global {
            aggregator: Aggregator::WeightedSum,
            tolerance: 0.1,
        };
        assert_eq!(
            level_compare(&m, &doc("a"), &doc("b"), &slot, &exact).unwrap(),
            PartialOrdering::Worse
        );
        assert_eq!(
            level_compare(&m, &doc("a"), &doc("b"), &slot, &loose).unwrap(),
            PartialOrdering::Equivalent
        );
    }

    fn two_slot(first: ComparatorSpec, first_width: usize, second: ComparatorSpec) -> Hierarchy {
        Hierarchy::new(vec![
            Slot::new(level(0..first_width, 1, &[]), first).unwrap(),
            Slot::new(level(first_width..first_width + 1, 2, &[]), second).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn stronger_slot_dominates() {
        let sum = ComparatorSpec::global(Aggregator::WeightedSum);
        let h = two_slot(sum, 1, sum);
        let m = matrix(&[("a", &[3.0, 0.0]), ("b", &[2.0, 9.0])]);
        assert_eq!(hierarchical_compare(&m, &doc("a"), &doc("b"), &h).unwrap(), PartialOrdering::Better);
        assert_eq!(hierarchical_compare(&m, &doc("b"), &doc("a"), &h).unwrap(), PartialOrdering::Worse);
    }

    #[test]
    fn incomparable_stronger_slot_blocks_weaker() {
        let h = two_slot(ComparatorSpec::Local, 2, ComparatorSpec::global(Aggregator::WeightedSum));
        let m = matrix(&[("a", &[2.0, 1.0, 5.0]), ("b", &[1.0, 2.0, 0.0])]);
        assert_eq!(
            hierarchical_compare(&m, &doc("a"), &doc("b"), &h).unwrap(),
            PartialOrdering::Incomparable
        );
    }

    #[test]
    fn same_document_is_equivalent_even_without_scores() {
        let h = two_slot(ComparatorSpec::Local, 1, ComparatorSpec::Local);
        let m = ScoreMatrix::new();
        assert_eq!(
            hierarchical_compare(&m, &doc("a"), &doc("a"), &h).unwrap(),
            PartialOrdering::Equivalent
        );
    }

    #[test]
    fn decided_comparison_skips_unscored_weaker_slots() {
        let h = two_slot(ComparatorSpec::Local, 1, ComparatorSpec::Local);
        let m = matrix(&[("a", &[3.0]), ("b", &[1.0])]);
        assert_eq!(hierarchical_compare(&m, &doc("a"), &doc("b"), &h).unwrap(), PartialOrdering::Better);
    }

    #[test]
    fn flatten_single_layer_single_level_is_identity() {
        let t = vec![thought("x", 1, 1), thought("y", 1, 1)];
        let h = flatten(&[LayerLevels {
            comparator: ComparatorSpec::Local,
            levels: vec![t.clone()],
        }])
        .unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.slots()[0].thoughts(), &t[..]);
    }

    #[test]
    fn flatten_orders_layer_major_level_minor() {
        let layers = [
            LayerLevels {
                comparator: ComparatorSpec::Local,
                levels: vec![vec![thought("a", 1, 1)]],
            },
            LayerLevels {
                comparator: ComparatorSpec::global(Aggregator::WeightedSum),
                levels: vec![vec![thought("b", 2, 1)], vec![thought("c", 2, 2)]],
            },
        ];
        let h = flatten(&layers).unwrap();
        let ids: Vec<_> = h.thoughts().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(h.slots()[1].comparator(), &ComparatorSpec::global(Aggregator::WeightedSum));
    }

    #[test]
    fn flatten_rejects_thought_in_two_layers() {
        let layers = [
            LayerLevels {
                comparator: ComparatorSpec::Local,
                levels: vec![vec![thought("a", 1, 1)]],
            },
            LayerLevels {
                comparator: ComparatorSpec::Local,
                levels: vec![vec![thought("a", 2, 1)]],
            },
        ];
        assert_eq!(
            flatten(&layers).unwrap_err(),
            HierarchyError::DuplicateThought(ThoughtId::new("a").unwrap())
        );
    }

    #[test]
    fn flatten_rejects_empty_level() {
        let layers = [LayerLevels {
            comparator: ComparatorSpec::Local,
            levels: vec![vec![thought("a", 1, 1)], vec![]],
        }];
        assert_eq!(flatten(&layers).unwrap_err(), HierarchyError::EmptyLevel { layer: 1, level: 2 });
    }

    #[test]
    fn matrix_rejects_negative_and_nan() {
        let mut m = ScoreMatrix::new();
        let t = ThoughtId::new("t").unwrap();
        assert!(m.insert(doc("a"), t.clone(), -1.0).is_err());
        assert!(m.insert(doc("a"), t, f64::NAN).is_err());
    }

    #[test]
    fn binary_thought_rejects_fractional_score() {
        let mut m = ScoreMatrix::new();
        let t = thought("t", 1, 1).with_binary(true);
        assert!(matches!(
            m.insert_for(doc("a"), &t, 0.5),
            Err(HierarchyError::NonBinaryScore { .. })
        ));
        m.insert_for(doc("a"), &t, 1.0).unwrap();
    }

    #[test]
    fn empty_ids_are_rejected() {
        assert_eq!(DocumentId::new("").unwrap_err(), HierarchyError::EmptyId);
        assert!(serde_json::from_str::<ThoughtId>("\"\"").is_err());
    }

    #[test]
    fn hierarchy_round_trips_through_json() {
        let h = two_slot(ComparatorSpec::Local, 2, ComparatorSpec::global(Aggregator::LeastSquares));
        let json = serde_json::to_string(&h).unwrap();
        let back: Hierarchy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }
}
