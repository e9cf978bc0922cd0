//! Explanation sets for pairwise preference and for inclusion in or exclusion from `D_k`.
//!
//! A pairwise explanation for d₁ over d₂ lists the hierarchy thoughts on
//! which d₁ scores at least as high as d₂, grouped by slot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{hierarchical_compare, DocumentId, Hierarchy, HierarchyError, OptionThought, PartialOrdering, ScoreMatrix, ThoughtId};
use crate::ranking::RankedOutput;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("document `{doc}` is not in the top-{k} set")]
    NotIncluded { doc: DocumentId, k: usize },
    #[error("document `{doc}` is in the top-{k} set")]
    NotExcluded { doc: DocumentId, k: usize },
    #[error("no document in the top-{k} set dominates `{doc}`; the depth map is inconsistent")]
    NoWitness { doc: DocumentId, k: usize },
    #[error("rank bound k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplanationKind {
    Pairwise {
        other: DocumentId,
    },
    Included {
        k: usize,
        /// Lower-ranked document the subject beats; absent for the fallback set.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<DocumentId>,
    },
    Excluded {
        k: usize,
        /// Retrieved document that beats the subject.
        witness: DocumentId,
    },
}

/// Thoughts of one hierarchy slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotThoughts {
    pub layer: u32,
    pub level: u32,
    pub thoughts: Vec<ThoughtId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub subject: DocumentId,
    #[serde(flatten)]
    pub kind: ExplanationKind,
    /// One entry per hierarchy slot, in hierarchy order.
    pub slots: Vec<SlotThoughts>,
    /// Positively scored filter thoughts; only filled for the fallback set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hard: Vec<ThoughtId>,
    pub fallback: bool,
}

impl Explanation {
    /// Every listed soft thought, in hierarchy order.
    pub fn soft_thoughts(&self) -> impl Iterator<Item = &ThoughtId> {
        self.slots.iter().flat_map(|s| s.thoughts.iter())
    }
}

fn partition<F>(hierarchy: &Hierarchy, mut keep: F) -> Result<Vec<SlotThoughts>, HierarchyError>
where
    F: FnMut(&OptionThought) -> Result<bool, HierarchyError>,
{
    hierarchy
        .slots()
        .iter()
        .map(|slot| {
            let (layer, level) = slot.position();
            let mut thoughts = Vec::new();
            for thought in slot.thoughts() {
                if keep(thought)? {
                    thoughts.push(thought.id.clone());
                }
            }
            Ok(SlotThoughts { layer, level, thoughts })
        })
        .collect()
}

/// `{ t : ρ(d1, t) ≥ ρ(d2, t) }` over the hierarchy thoughts.
pub fn explain_pair(matrix: &ScoreMatrix, d1: &DocumentId, d2: &DocumentId, hierarchy: &Hierarchy) -> Result<Explanation, ExplainError> {
    let slots = partition(hierarchy, |t| Ok(matrix.score(d1, &t.id)? >= matrix.score(d2, &t.id)?))?;
    Ok(Explanation {
        subject: d1.clone(),
        kind: ExplanationKind::Pairwise { other: d2.clone() },
        slots,
        hard: Vec::new(),
        fallback: false,
    })
}

fn candidates(ranked: &RankedOutput, mut admit: impl FnMut(usize) -> bool) -> Vec<(usize, &DocumentId)> {
    let mut found: Vec<(usize, &DocumentId)> = ranked.depths.iter().filter(|(_, d)| admit(*d)).map(|(id, d)| (d, id)).collect();
    found.sort();
    found
}

/// Why `d` is in `D_k`: a document at depth exactly `k` that `d` beats, or,
/// when there is none, every thought (filter thoughts included) on which `d` scores above zero.
pub fn explain_included(
    matrix: &ScoreMatrix,
    d: &DocumentId,
    k: usize,
    ranked: &RankedOutput,
    hierarchy: &Hierarchy,
    hard: &[OptionThought],
) -> Result<Explanation, ExplainError> {
    if k == 0 {
        return Err(ExplainError::ZeroK);
    }
    if !ranked.depth(d).is_some_and(|depth| depth < k) {
        return Err(ExplainError::NotIncluded { doc: d.clone(), k });
    }
    for (_, other) in candidates(ranked, |depth| depth == k) {
        if hierarchical_compare(matrix, d, other, hierarchy)? == PartialOrdering::Better {
            let mut explanation = explain_pair(matrix, d, other, hierarchy)?;
            explanation.kind = ExplanationKind::Included {
                k,
                witness: Some(other.clone()),
            };
            return Ok(explanation);
        }
    }
    let slots = partition(hierarchy, |t| Ok(matrix.score(d, &t.id)? > 0.0))?;
    let mut positive_hard = Vec::new();
    for thought in hard {
        if matrix.score(d, &thought.id)? > 0.0 {
            positive_hard.push(thought.id.clone());
        }
    }
    Ok(Explanation {
        subject: d.clone(),
        kind: ExplanationKind::Included { k, witness: None },
        slots,
        hard: positive_hard,
        fallback: true,
    })
}

/// Why `d` is not in `D_k`: a document of `D_k` that beats it, with that document's pairwise set.
///
/// The witness is the qualifying document of least depth, ties broken by id.
pub fn explain_excluded(
    matrix: &ScoreMatrix,
    d: &DocumentId,
    k: usize,
    ranked: &RankedOutput,
    hierarchy: &Hierarchy,
) -> Result<Explanation, ExplainError> {
    if k == 0 {
        return Err(ExplainError::ZeroK);
    }
    if ranked.depth(d).is_some_and(|depth| depth < k) {
        return Err(ExplainError::NotExcluded { doc: d.clone(), k });
    }
    for (_, other) in candidates(ranked, |depth| depth < k) {
        if hierarchical_compare(matrix, other, d, hierarchy)? == PartialOrdering::Better {
            let mut explanation = explain_pair(matrix, other, d, hierarchy)?;
            explanation.subject = d.clone();
            explanation.kind = ExplanationKind::Excluded {
                k,
                witness: other.clone(),
            };
            return Ok(explanation);
        }
    }
    Err(ExplainError::NoWitness { doc: d.clone(), k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{ComparatorSpec, Slot};
    use crate::ranking::top_k;

    fn id(s: &str) -> DocumentId {
        DocumentId::new(s).unwrap()
    }

    fn thought(name: &str, level: u32) -> OptionThought {
        OptionThought::new(ThoughtId::new(name).unwrap(), 1, level)
    }

    /// Slot 1 scores a=3, b=3, c=2, d=1; slot 2 scores a=1, b=2, c=9, d=0.
    fn lexicographic() -> (ScoreMatrix, Hierarchy, Vec<DocumentId>) {
        let mut m = ScoreMatrix::new();
        for (doc, s1, s2) in [("a", 3.0, 1.0), ("b", 3.0, 2.0), ("c", 2.0, 9.0), ("d", 1.0, 0.0)] {
            m.insert(id(doc), ThoughtId::new("t1").unwrap(), s1).unwrap();
            m.insert(id(doc), ThoughtId::new("t2").unwrap(), s2).unwrap();
        }
        let h = Hierarchy::new(vec![
            Slot::new(vec![thought("t1", 1)], ComparatorSpec::Local).unwrap(),
            Slot::new(vec![thought("t2", 2)], ComparatorSpec::Local).unwrap(),
        ])
        .unwrap();
        (m, h, ["a", "b", "c", "d"].map(id).to_vec())
    }

    fn names(slot: &SlotThoughts) -> Vec<&str> {
        slot.thoughts.iter().map(|t| t.as_str()).collect()
    }

    #[test]
    fn pair_with_itself_lists_everything() {
        let (m, h, _) = lexicographic();
        let e = explain_pair(&m, &id("c"), &id("c"), &h).unwrap();
        assert_eq!(e.soft_thoughts().count(), 2);
    }

    #[test]
    fn pair_partition_by_slot() {
        // d1 = (2 | 0), d2 = (1 | 3)
        let mut m = ScoreMatrix::new();
        for (doc, s1, s2) in [("x", 2.0, 0.0), ("y", 1.0, 3.0)] {
            m.insert(id(doc), ThoughtId::new("t1").unwrap(), s1).unwrap();
            m.insert(id(doc), ThoughtId::new("t2").unwrap(), s2).unwrap();
        }
        let (_, h, _) = lexicographic();
        let e = explain_pair(&m, &id("x"), &id("y"), &h).unwrap();
        assert_eq!(names(&e.slots[0]), ["t1"]);
        assert!(e.slots[1].thoughts.is_empty());
        let e = explain_pair(&m, &id("y"), &id("x"), &h).unwrap();
        assert!(e.slots[0].thoughts.is_empty());
    }

    #[test]
    fn included_uses_the_next_tier() {
        let (m, h, docs) = lexicographic();
        let ranked = top_k(&docs, &m, &h, 2).unwrap();
        let e = explain_included(&m, &id("a"), 2, &ranked, &h, &[]).unwrap();
        assert_eq!(
            e.kind,
            ExplanationKind::Included {
                k: 2,
                witness: Some(id("c"))
            }
        );
        assert_eq!(names(&e.slots[0]), ["t1"]);
        assert!(!e.fallback);
    }

    #[test]
    fn excluded_uses_the_least_deep_dominator() {
        let (m, h, docs) = lexicographic();
        let ranked = top_k(&docs, &m, &h, 2).unwrap();
        let e = explain_excluded(&m, &id("c"), 2, &ranked, &h).unwrap();
        assert_eq!(e.subject, id("c"));
        assert_eq!(e.kind, ExplanationKind::Excluded { k: 2, witness: id("b") });
        assert_eq!(names(&e.slots[0]), ["t1"]);
        assert!(matches!(
            explain_excluded(&m, &id("a"), 2, &ranked, &h),
            Err(ExplainError::NotExcluded { .. })
        ));
        assert!(matches!(
            explain_included(&m, &id("c"), 2, &ranked, &h, &[]),
            Err(ExplainError::NotIncluded { .. })
        ));
    }

    #[test]
    fn chain_exclusion_has_a_witness() {
        let mut m = ScoreMatrix::new();
        for (doc, s) in [("a", 3.0), ("b", 2.0), ("c", 1.0)] {
            m.insert(id(doc), ThoughtId::new("t1").unwrap(), s).unwrap();
        }
        let h = Hierarchy::new(vec![Slot::new(vec![thought("t1", 1)], ComparatorSpec::Local).unwrap()]).unwrap();
        let docs = ["a", "b", "c"].map(id).to_vec();
        let ranked = top_k(&docs, &m, &h, 1).unwrap();
        let e = explain_excluded(&m, &id("c"), 1, &ranked, &h).unwrap();
        assert_eq!(e.kind, ExplanationKind::Excluded { k: 1, witness: id("a") });
        assert_eq!(names(&e.slots[0]), ["t1"]);
    }

    #[test]
    fn fallback_lists_positive_thoughts_including_hard_ones() {
        let (mut m, h, _) = lexicographic();
        m.insert(id("d"), ThoughtId::new("kw").unwrap(), 1.0).unwrap();
        m.insert(id("d"), ThoughtId::new("kw2").unwrap(), 0.0).unwrap();
        let hard = [thought("kw", 1), thought("kw2", 1)];
        let docs = vec![id("d")];
        let ranked = top_k(&docs, &m, &h, 1).unwrap();
        let e = explain_included(&m, &id("d"), 1, &ranked, &h, &hard).unwrap();
        assert!(e.fallback);
        assert_eq!(e.kind, ExplanationKind::Included { k: 1, witness: None });
        assert_eq!(names(&e.slots[0]), ["t1"]);
        assert!(e.slots[1].thoughts.is_empty());
        assert_eq!(e.hard, [ThoughtId::new("kw").unwrap()]);
    }

    #[test]
    fn serialized_shape() {
        let (m, h, docs) = lexicographic();
        let ranked = top_k(&docs, &m, &h, 2).unwrap();
        let e = explain_excluded(&m, &id("d"), 2, &ranked, &h).unwrap();
        let json = serde_json::to_value(&e).unwrap();
        assert_eq!(json["kind"], "excluded");
        assert_eq!(json["witness"], "b");
        assert_eq!(json["slots"][0]["layer"], 1);
        assert_eq!(serde_json::from_value::<Explanation>(json).unwrap(), e);
    }
}
