//! Random instances and an independent brute-force ranking oracle.
#![allow(dead_code)]

use layerrank_core::hierarchy::{Aggregator, ComparatorSpec, DocumentId, Hierarchy, OptionThought, ScoreMatrix, Slot, ThoughtId};
use layerrank_core::pipeline::{AggregationMetric, LayerSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const COMPARATORS: [ComparatorSpec; 4] = [
    ComparatorSpec::Local,
    ComparatorSpec::Global {
        aggregator: Aggregator::WeightedSum,
        tolerance: 0.0,
    },
    ComparatorSpec::Global {
        aggregator: Aggregator::WorstCase,
        tolerance: 0.0,
    },
    ComparatorSpec::Global {
        aggregator: Aggregator::LeastSquares,
        tolerance: 0.0,
    },
];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn doc(i: usize) -> DocumentId {
    DocumentId::new(format!("d{i:02}")).unwrap()
}

pub fn thought(name: &str) -> ThoughtId {
    ThoughtId::new(name).unwrap()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub docs: Vec<DocumentId>,
    pub matrix: ScoreMatrix,
    pub hierarchy: Hierarchy,
}

/// Up to `max_docs` documents, up to `max_slots` slots of one to three thoughts,
/// integer scores 0–5, weights 1–3, any comparator kind.
pub fn instance(rng: &mut StdRng, max_docs: usize, max_slots: usize) -> Instance {
    let n = rng.random_range(1..=max_docs);
    let docs: Vec<DocumentId> = (0..n).map(doc).collect();
    let slot_count = rng.random_range(1..=max_slots);
    let mut slots = Vec::new();
    let mut matrix = ScoreMatrix::new();
    for s in 0..slot_count {
        let width = rng.random_range(1..=3);
        let thoughts: Vec<OptionThought> = (0..width)
            .map(|t| {
                OptionThought::new(thought(&format!("s{s}t{t}")), s as u32 + 1, 1)
                    .with_weight(rng.random_range(1..=3) as f64)
            })
            .collect();
        for t in &thoughts {
            for d in &docs {
                matrix.insert(d.clone(), t.id.clone(), rng.random_range(0..=5) as f64).unwrap();
            }
        }
        let comparator = COMPARATORS[rng.random_range(0..COMPARATORS.len())];
        slots.push(Slot::new(thoughts, comparator).unwrap());
    }
    Instance {
        docs,
        matrix,
        hierarchy: Hierarchy::new(slots).unwrap(),
    }
}

/// Strict preference of `a` over `b`, recomputed from raw scores.
pub fn oracle_prefers(inst: &Instance, a: &DocumentId, b: &DocumentId) -> bool {
    for slot in inst.hierarchy.slots() {
        let sa: Vec<(f64, f64)> = slot.thoughts().iter().map(|t| (t.weight, inst.matrix.get(a, &t.id).unwrap())).collect();
        let sb: Vec<(f64, f64)> = slot.thoughts().iter().map(|t| (t.weight, inst.matrix.get(b, &t.id).unwrap())).collect();
        let verdict = match *slot.comparator() {
            ComparatorSpec::Local => {
                let ge = sa.iter().zip(&sb).all(|(x, y)| x.1 >= y.1);
                let le = sa.iter().zip(&sb).all(|(x, y)| x.1 <= y.1);
                match (ge, le) {
                    (true, true) => None,
                    (true, false) => Some(true),
                    _ => Some(false),
                }
            }
            ComparatorSpec::Global { aggregator, .. } => {
                let agg = |v: &[(f64, f64)]| match aggregator {
                    Aggregator::WeightedSum => v.iter().map(|(w, s)| w * s).sum::<f64>(),
                    Aggregator::LeastSquares => v.iter().map(|(w, s)| w * s * s).sum::<f64>(),
                    Aggregator::WorstCase => v.iter().map(|(w, s)| w * s).fold(f64::INFINITY, f64::min),
                };
                let (x, y) = (agg(&sa), agg(&sb));
                if x == y {
                    None
                } else {
                    Some(x > y)
                }
            }
        };
        if let Some(better) = verdict {
            return better;
        }
    }
    false
}

/// Length of the longest strict preference chain ending at each document, by
/// enumerating every chain.
pub fn oracle_depths(inst: &Instance) -> Vec<usize> {
    let n = inst.docs.len();
    let beats: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| oracle_prefers(inst, &inst.docs[i], &inst.docs[j])).collect())
        .collect();
    fn longest_above(beats: &[Vec<bool>], j: usize) -> usize {
        (0..beats.len())
            .filter(|&i| beats[i][j])
            .map(|i| 1 + longest_above(beats, i))
            .max()
            .unwrap_or(0)
    }
    (0..n).map(|j| longest_above(&beats, j)).collect()
}

/// `D_k` in ascending depth, input order within a tier.
pub fn oracle_top_k(inst: &Instance, k: usize) -> Vec<(DocumentId, usize)> {
    let depths = oracle_depths(inst);
    let mut kept: Vec<(usize, DocumentId, usize)> = inst
        .docs
        .iter()
        .enumerate()
        .filter(|(i, _)| depths[*i] < k)
        .map(|(i, d)| (depths[i], d.clone(), i))
        .collect();
    kept.sort_by_key(|(depth, _, i)| (*depth, *i));
    kept.into_iter().map(|(depth, d, _)| (d, depth)).collect()
}

/// A binary single- or two-level layer over `docs` with positive weights.
pub fn binary_layer(rng: &mut StdRng, docs: &[DocumentId], matrix: &mut ScoreMatrix, metric: AggregationMetric) -> LayerSpec {
    let levels = rng.random_range(1..=2);
    let levels: Vec<Vec<OptionThought>> = (0..levels)
        .map(|l| {
            (0..rng.random_range(1..=4))
                .map(|t| {
                    OptionThought::new(thought(&format!("l{l}t{t}")), 1, l as u32 + 1)
                        .with_binary(true)
                        .with_weight(rng.random_range(1..=9) as f64 / 4.0)
                })
                .collect()
        })
        .collect();
    for t in levels.iter().flatten() {
        for d in docs {
            matrix.insert(d.clone(), t.id.clone(), rng.random_range(0..=1) as f64).unwrap();
        }
    }
    LayerSpec::new("random", levels, metric)
}

pub fn with_metric(layer: &LayerSpec, metric: AggregationMetric) -> LayerSpec {
    LayerSpec { metric, ..layer.clone() }
}

pub fn is_subset(small: &[DocumentId], large: &[DocumentId]) -> bool {
    small.iter().all(|d| large.contains(d))
}

/// A comparator-only pipeline with its table scores and its flattened hierarchy.
#[derive(Debug, Clone)]
pub struct RandomPipeline {
    pub spec: layerrank_core::pipeline::PipelineSpec,
    pub corpus: Vec<layerrank_core::corpus::Document>,
    pub table: layerrank_core::providers::ScoreFixture,
    pub flat: Hierarchy,
    pub has_selection: bool,
}

/// One to three comparator-based layers (selection or untruncated rank), one or two
/// levels each, over up to `max_docs` documents.
pub fn comparator_pipeline(rng: &mut StdRng, max_docs: usize) -> RandomPipeline {
    use layerrank_core::corpus::Document;
    use layerrank_core::hierarchy::{flatten, LayerLevels};
    use layerrank_core::pipeline::PipelineSpec;
    use layerrank_core::providers::{ScoreFixture, ScoreRecord};

    let n = rng.random_range(1..=max_docs);
    let docs: Vec<DocumentId> = (0..n).map(doc).collect();
    let metrics = [
        AggregationMetric::LocallyBetter,
        AggregationMetric::MaxCount,
        AggregationMetric::MaxWeight,
        AggregationMetric::RankCount { top: None },
        AggregationMetric::RankWeight { top: None },
    ];
    let mut records = Vec::new();
    let mut layers = Vec::new();
    let mut flat_layers = Vec::new();
    for p in 0..rng.random_range(1..=3) {
        let metric = metrics[rng.random_range(0..metrics.len())];
        let counts = matches!(metric, AggregationMetric::MaxCount | AggregationMetric::RankCount { .. });
        let levels: Vec<Vec<OptionThought>> = (0..rng.random_range(1..=2))
            .map(|l| {
                (0..rng.random_range(1..=3))
                    .map(|t| {
                        let weight = if counts { 1.0 } else { rng.random_range(1..=3) as f64 };
                        OptionThought::new(thought(&format!("p{p}l{l}t{t}")), 0, 0)
                            .with_weight(weight)
                            .with_binary(counts)
                    })
                    .collect()
            })
            .collect();
        for t in levels.iter().flatten() {
            for d in &docs {
                let score = if counts { rng.random_range(0..=1) } else { rng.random_range(0..=5) };
                records.push(ScoreRecord {
                    doc: d.clone(),
                    thought: t.id.clone(),
                    score: score as f64,
                });
            }
        }
        let mut layer = LayerSpec::new(format!("layer{p}"), levels, metric);
        match metric {
            AggregationMetric::LocallyBetter => {
                layer = layer.with_comparator(COMPARATORS[rng.random_range(0..COMPARATORS.len())]);
            }
            AggregationMetric::MaxWeight | AggregationMetric::RankWeight { .. } => {
                layer = layer.with_comparator(COMPARATORS[rng.random_range(1..COMPARATORS.len())]);
            }
            _ => {}
        }
        flat_layers.push(LayerLevels {
            comparator: layer.effective_comparator().unwrap(),
            levels: layer.stamped(p + 1).levels,
        });
        layers.push(layer);
    }
    let has_selection = layers.iter().any(|l| l.metric.is_selection());
    let top_k = if has_selection { 1 } else { rng.random_range(1..=3) };
    RandomPipeline {
        spec: PipelineSpec::new(layers, Some(top_k)).unwrap(),
        corpus: docs.iter().map(|d| Document::new(d.as_str(), "").unwrap()).collect(),
        table: ScoreFixture::from_records(records).unwrap(),
        flat: flatten(&flat_layers).unwrap(),
        has_selection,
    }
}
