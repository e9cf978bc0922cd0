//! Hard filtering, ≻-maximal sets, depth tiers and top-k selection.
//!
//! The depth of a document is the length of the longest chain of strictly
//! better documents above it. `D_k` is the set of documents with depth below
//! `k`, so `D_1` is the maximal set and the tiers are nested.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{compare_slots, DocumentId, Hierarchy, HierarchyError, OptionThought, PartialOrdering, ScoreMatrix, Slot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("rank bound k must be at least 1")]
    ZeroK,
    #[error("at-least-{k} filter needs 1 <= k <= {available}")]
    InvalidAtLeast { k: usize, available: usize },
    #[error("document `{0}` is listed more than once")]
    DuplicateDocument(DocumentId),
    #[error("dominance relation contains a cycle through `{0}`")]
    Cycle(DocumentId),
}

/// How the hard slot admits documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardMode {
    /// Positive on every hard thought.
    All,
    /// Positive on at least `k` hard thoughts.
    AtLeast(usize),
}

/// Keeps the documents that pass the hard thoughts, in input order.
pub fn hard_filter(
    corpus: &[DocumentId],
    matrix: &ScoreMatrix,
    hard: &[OptionThought],
    mode: HardMode,
) -> Result<Vec<DocumentId>, RankingError> {
    let needed = match mode {
        HardMode::All => hard.len(),
        HardMode::AtLeast(k) => {
            if k == 0 || k > hard.len() {
                return Err(RankingError::InvalidAtLeast {
                    k,
                    available: hard.len(),
                });
            }
            k
        }
    };
    let mut kept = Vec::new();
    for doc in corpus {
        let mut passed = 0;
        for thought in hard {
            if matrix.score(doc, &thought.id)? > 0.0 {
                passed += 1;
            }
        }
        if passed >= needed {
            kept.push(doc.clone());
        }
    }
    Ok(kept)
}

/// ≻-depth of each considered document, in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthMap(IndexMap<DocumentId, usize>);

impl DepthMap {
    pub fn get(&self, doc: &DocumentId) -> Option<usize> {
        self.0.get(doc).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DocumentId, usize)> {
        self.0.iter().map(|(d, depth)| (d, *depth))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Documents at exactly `depth`, in input order.
    pub fn tier(&self, depth: usize) -> Vec<DocumentId> {
        self.iter().filter(|(_, d)| *d == depth).map(|(id, _)| id.clone()).collect()
    }
}

impl FromIterator<(DocumentId, usize)> for DepthMap {
    fn from_iter<I: IntoIterator<Item = (DocumentId, usize)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// `D_k` with the depth information it was cut from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedOutput {
    /// Ascending depth; input order within a tier.
    pub survivors: Vec<DocumentId>,
    pub depths: DepthMap,
    pub k: usize,
}

impl RankedOutput {
    pub fn contains(&self, doc: &DocumentId) -> bool {
        self.survivors.contains(doc)
    }

    pub fn depth(&self, doc: &DocumentId) -> Option<usize> {
        self.depths.get(doc)
    }
}

/// Strict dominance relation over `docs`: `better[i]` lists every `j` with docs[i] ≻ docs[j].
struct Dominance {
    better: Vec<Vec<usize>>,
}

impl Dominance {
    fn build(docs: &[DocumentId], matrix: &ScoreMatrix, slots: &[Slot]) -> Result<Self, RankingError> {
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in docs {
            if !seen.insert(doc) {
                return Err(RankingError::DuplicateDocument(doc.clone()));
            }
        }
        let mut better = vec![Vec::new(); docs.len()];
        for i in 0..docs.len() {
            for j in (i + 1)..docs.len() {
                match compare_slots(matrix, &docs[i], &docs[j], slots)? {
                    PartialOrdering::Better => better[i].push(j),
                    PartialOrdering::Worse => better[j].push(i),
                    PartialOrdering::Equivalent | PartialOrdering::Incomparable => {}
                }
            }
        }
        Ok(Self { better })
    }

    /// Longest-path depth via Kahn's order over the dominance DAG.
    fn depths(&self, docs: &[DocumentId]) -> Result<Vec<usize>, RankingError> {
        let n = self.better.len();
        let mut indegree = vec![0usize; n];
        for targets in &self.better {
            for &j in targets {
                indegree[j] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut depth = vec![0usize; n];
        let mut visited = 0;
        while let Some(i) = queue.pop() {
            visited += 1;
            for &j in &self.better[i] {
                depth[j] = depth[j].max(depth[i] + 1);
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    queue.push(j);
                }
            }
        }
        if visited != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).expect("unvisited node has indegree");
            return Err(RankingError::Cycle(docs[stuck].clone()));
        }
        Ok(depth)
    }
}

fn depths_over(docs: &[DocumentId], matrix: &ScoreMatrix, slots: &[Slot]) -> Result<Vec<usize>, RankingError> {
    Dominance::build(docs, matrix, slots)?.depths(docs)
}

/// Documents not strictly dominated by any other document in `docs`.
pub fn maximal_set(docs: &[DocumentId], matrix: &ScoreMatrix, hierarchy: &Hierarchy) -> Result<Vec<DocumentId>, RankingError> {
    maximal_over(docs, matrix, hierarchy.slots())
}

pub(crate) fn maximal_over(docs: &[DocumentId], matrix: &ScoreMatrix, slots: &[Slot]) -> Result<Vec<DocumentId>, RankingError> {
    let dominance = Dominance::build(docs, matrix, slots)?;
    let mut dominated = vec![false; docs.len()];
    for targets in &dominance.better {
        for &j in targets {
            dominated[j] = true;
        }
    }
    Ok(docs
        .iter()
        .zip(dominated)
        .filter(|(_, dominated)| !dominated)
        .map(|(d, _)| d.clone())
        .collect())
}

pub fn depth_map(docs: &[DocumentId], matrix: &ScoreMatrix, hierarchy: &Hierarchy) -> Result<DepthMap, RankingError> {
    let depths = depths_over(docs, matrix, hierarchy.slots())?;
    Ok(docs.iter().cloned().zip(depths).collect())
}

fn cut(depths: DepthMap, k: usize) -> RankedOutput {
    let mut survivors: Vec<(usize, &DocumentId)> = depths.iter().filter(|(_, d)| *d < k).map(|(id, d)| (d, id)).collect();
    // stable: input order is kept inside each tier
    survivors.sort_by_key(|(depth, _)| *depth);
    let survivors = survivors.into_iter().map(|(_, id)| id.clone()).collect();
    RankedOutput { survivors, depths, k }
}

/// `D_k`: every document whose ≻-depth is below `k`.
pub fn top_k(docs: &[DocumentId], matrix: &ScoreMatrix, hierarchy: &Hierarchy, k: usize) -> Result<RankedOutput, RankingError> {
    if k == 0 {
        return Err(RankingError::ZeroK);
    }
    Ok(cut(depth_map(docs, matrix, hierarchy)?, k))
}

/// One refinement stage of [`progressive_top_k_staged`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    /// Number of leading slots the stage compared with.
    pub slots: usize,
    pub considered: Vec<DocumentId>,
    pub pruned: Vec<DocumentId>,
}

/// Computes `D_k` slot by slot, pruning with each restricted hierarchy.
pub fn progressive_top_k(docs: &[DocumentId], matrix: &ScoreMatrix, hierarchy: &Hierarchy, k: usize) -> Result<RankedOutput, RankingError> {
    progressive_top_k_staged(docs, matrix, hierarchy, k).map(|(ranked, _)| ranked)
}

pub fn progressive_top_k_staged(
    docs: &[DocumentId],
    matrix: &ScoreMatrix,
    hierarchy: &Hierarchy,
    k: usize,
) -> Result<(RankedOutput, Vec<Stage>), RankingError> {
    let mut owned = matrix.clone();
    progressive_top_k_lazy(docs, &mut owned, hierarchy, k, |_, _, _| Ok::<(), RankingError>(()))
}

/// Progressive ranking that asks `score_slot` for each slot's scores only
/// once the previous stage's survivors are known.
///
/// `score_slot(survivors, slot, matrix)` must fill in the slot's scores for
/// every survivor. Pruned documents are never scored on weaker slots.
///
/// The returned depth map covers the final survivors only; pruned documents
/// are known to have depth ≥ k but their exact depth is not computed.
pub fn progressive_top_k_lazy<E, F>(
    docs: &[DocumentId],
    matrix: &mut ScoreMatrix,
    hierarchy: &Hierarchy,
    k: usize,
    mut score_slot: F,
) -> Result<(RankedOutput, Vec<Stage>), E>
where
    E: From<RankingError>,
    F: FnMut(&[DocumentId], &Slot, &mut ScoreMatrix) -> Result<(), E>,
{
    if k == 0 {
        return Err(RankingError::ZeroK.into());
    }
    let slots = hierarchy.slots();
    let mut current: Vec<DocumentId> = docs.to_vec();
    let mut stages = Vec::with_capacity(slots.len());
    let mut last_depths: Option<Vec<usize>> = None;
    for j in 1..=slots.len() {
        score_slot(&current, &slots[j - 1], matrix)?;
        let depths = depths_over(&current, matrix, &slots[..j])?;
        let (kept, pruned): (Vec<_>, Vec<_>) = current.iter().cloned().zip(depths).partition(|(_, d)| *d < k);
        stages.push(Stage {
            slots: j,
            considered: current.clone(),
            pruned: pruned.into_iter().map(|(id, _)| id).collect(),
        });
        last_depths = Some(kept.iter().map(|(_, d)| *d).collect());
        current = kept.into_iter().map(|(id, _)| id).collect();
    }
    let depths: DepthMap = match last_depths {
        Some(depths) => current.iter().cloned().zip(depths).collect(),
        None => {
            // no slots: everything is equivalent
            let mut seen = HashSet::new();
            for doc in &current {
                if !seen.insert(doc) {
                    return Err(RankingError::DuplicateDocument(doc.clone()).into());
                }
            }
            current.iter().map(|d| (d.clone(), 0)).collect()
        }
    };
    Ok((cut(depths, k), stages))
}
