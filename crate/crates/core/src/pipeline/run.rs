use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use super::{
    apply_metric, BacktrackEvent, ChatRefinement, ExpansionHook, LayerRecord, LayerSpec, PipelineError, PipelineSpec,
    PipelineTrace, RefinedThought, RefinementBinding, RefinementHook, StaticRefinement,
};
use crate::corpus::Document;
use crate::hierarchy::{DocumentId, Hierarchy, OptionThought, ScoreMatrix, Slot, ThoughtId};
use crate::providers::{ProviderError, ProviderRegistry};
use crate::ranking::{top_k, RankedOutput};

#[derive(Clone)]
pub struct RunOptions {
    /// Provider calls in flight at once within a layer.
    pub parallelism: usize,
    /// Overrides the pipeline's terminal depth bound.
    pub top_k: Option<usize>,
    /// Dynamic layer expansion; off when `None`.
    pub expansion: Option<Arc<dyn ExpansionHook>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            parallelism: 4,
            top_k: None,
            expansion: None,
        }
    }
}

impl std::fmt::Debug for RunOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunOptions")
            .field("parallelism", &self.parallelism)
            .field("top_k", &self.top_k)
            .field("expansion", &self.expansion.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutcome {
    pub survivors: Vec<DocumentId>,
    pub record: LayerRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub output: RankedOutput,
    pub trace: PipelineTrace,
    /// Every score computed during the run.
    pub matrix: ScoreMatrix,
}

/// A failed run together with the layers that completed before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: PipelineError,
    pub trace: PipelineTrace,
}

fn score_pairs(
    docs: &[&Document],
    thoughts: &[&OptionThought],
    registry: &ProviderRegistry,
    query: &str,
    parallelism: usize,
    layer: usize,
    cache: &mut ScoreMatrix,
) -> Result<(), PipelineError> {
    let jobs: Vec<(usize, usize)> = (0..docs.len())
        .flat_map(|d| (0..thoughts.len()).map(move |t| (d, t)))
        .filter(|&(d, t)| !cache.contains(&docs[d].id, &thoughts[t].id))
        .collect();
    if jobs.is_empty() {
        return Ok(());
    }
    let run = |&(d, t): &(usize, usize)| registry.score(thoughts[t], docs[d], query);
    let workers = parallelism.max(1).min(jobs.len());
    let results: Vec<Option<Result<f64, ProviderError>>> = if workers == 1 {
        let mut results = Vec::with_capacity(jobs.len());
        for job in &jobs {
            let result = run(job);
            let failed = result.is_err();
            results.push(Some(result));
            if failed {
                break;
            }
        }
        results
    } else {
        let slots: Vec<OnceLock<Result<f64, ProviderError>>> = jobs.iter().map(|_| OnceLock::new()).collect();
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| {
                    // jobs are claimed in order, so every job before a failure is finished
                    while !failed.load(Ordering::SeqCst) {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(job) = jobs.get(i) else { break };
                        let result = run(job);
                        if result.is_err() {
                            failed.store(true, Ordering::SeqCst);
                        }
                        let _ = slots[i].set(result);
                    }
                });
            }
        });
        slots.into_iter().map(OnceLock::into_inner).collect()
    };
    for (&(d, t), result) in jobs.iter().zip(results) {
        match result {
            Some(Ok(score)) => cache.insert_for(docs[d].id.clone(), thoughts[t], score)?,
            Some(Err(source)) => {
                return Err(PipelineError::Provider {
                    layer,
                    doc: docs[d].id.clone(),
                    thought: thoughts[t].id.clone(),
                    source,
                })
            }
            None => break,
        }
    }
    Ok(())
}

fn check_bindings(layer: &LayerSpec, path: &str, registry: &ProviderRegistry) -> Result<(), PipelineError> {
    for (j, level) in layer.levels.iter().enumerate() {
        for (t, thought) in level.iter().enumerate() {
            registry.check(thought).map_err(|e| PipelineError::Config {
                path: format!("{path}.levels[{j}][{t}].provider"),
                message: e.to_string(),
            })?;
        }
    }
    Ok(())
}

fn refinement_hook<'a>(layer: &LayerSpec, registry: &'a ProviderRegistry) -> Option<Box<dyn RefinementHook + 'a>> {
    match layer.refine.hook.as_ref()? {
        RefinementBinding::Static { alternatives } => Some(Box::new(StaticRefinement {
            alternatives: alternatives.clone(),
        })),
        RefinementBinding::Chat { model } => Some(Box::new(ChatRefinement {
            client: registry.chat()?,
            model: model.clone(),
        })),
    }
}

/// Scores `docs` on one layer, applies its metric and backtracks on an empty result.
///
/// `layer` must be stamped with its position. Selection metrics compare under
/// `prior` first. Scores are cached in `cache` and reused across attempts.
pub fn run_layer(
    docs: &[&Document],
    layer: &LayerSpec,
    prior: &[Slot],
    registry: &ProviderRegistry,
    query: &str,
    options: &RunOptions,
    cache: &mut ScoreMatrix,
) -> Result<LayerOutcome, PipelineError> {
    let index = layer.thoughts().next().map_or(0, |t| t.layer as usize);
    let path = format!("layers[{}]", index.saturating_sub(1));
    layer.validate(&path)?;
    check_bindings(layer, &path, registry)?;
    let ids: Vec<DocumentId> = docs.iter().map(|d| d.id.clone()).collect();
    let hook = refinement_hook(layer, registry);
    let mut current = layer.clone();
    let mut backtracks = Vec::new();
    let mut attempt = 0;
    let (survivors, ranking, exhausted) = loop {
        let thoughts: Vec<&OptionThought> = current.thoughts().collect();
        score_pairs(docs, &thoughts, registry, query, options.parallelism, index, cache)?;
        let (kept, ranking) = apply_metric(prior, &ids, cache, &current)?;
        if !kept.is_empty() || ids.is_empty() {
            break (kept, ranking, false);
        }
        if attempt >= layer.refine.budget {
            break (kept, ranking, true);
        }
        attempt += 1;
        let Some(hook) = hook.as_ref() else {
            break (kept, ranking, true);
        };
        let levels = hook
            .refine(&current, attempt, query)
            .map_err(|source| PipelineError::Refinement { layer: index, source })?;
        let Some(levels) = levels else {
            break (kept, ranking, true);
        };
        current = LayerSpec { levels, ..current }.stamped(index as u32);
        current.validate(&format!("{path}.refine"))?;
        check_bindings(&current, &format!("{path}.refine"), registry)?;
        backtracks.push(BacktrackEvent {
            attempt,
            thoughts: current
                .thoughts()
                .map(|t| RefinedThought {
                    id: t.id.clone(),
                    criterion: t.criterion.clone(),
                })
                .collect(),
        });
    };
    let thoughts: Vec<&OptionThought> = current.thoughts().collect();
    let record = LayerRecord {
        index,
        name: current.name.clone(),
        metric: current.metric,
        comparator: current.comparator,
        levels: current.levels.clone(),
        inputs: ids.clone(),
        scores: cache.slice(&ids, &thoughts),
        survivors: survivors.clone(),
        ranking,
        backtracks,
        exhausted,
    };
    Ok(LayerOutcome { survivors, record })
}

/// Runs every layer in order, feeding each layer's survivors to the next, and
/// ranks the final survivors under all comparator layers.
pub fn run_pipeline(
    spec: &PipelineSpec,
    corpus: &[Document],
    query: &str,
    registry: &ProviderRegistry,
    options: &RunOptions,
) -> Result<PipelineRun, Box<RunFailure>> {
    let mut trace = PipelineTrace {
        query: query.to_owned(),
        layers: Vec::new(),
        output: None,
    };
    macro_rules! fail {
        ($error:expr) => {
            return Err(Box::new(RunFailure {
                error: $error.into(),
                trace,
            }))
        };
    }
    if let Err(e) = spec.validate() {
        fail!(e);
    }
    if options.top_k == Some(0) {
        fail!(PipelineError::Config {
            path: "top_k".into(),
            message: "top_k must be at least 1".into(),
        });
    }
    for (i, layer) in spec.layers.iter().enumerate() {
        let path = format!("layers[{i}]");
        if let Err(e) = check_bindings(layer, &path, registry) {
            fail!(e);
        }
        if let Some(RefinementBinding::Static { alternatives }) = &layer.refine.hook {
            for (a, levels) in alternatives.iter().enumerate() {
                let alternative = LayerSpec {
                    levels: levels.clone(),
                    ..layer.clone()
                };
                if let Err(e) = check_bindings(&alternative, &format!("{path}.refine.hook.alternatives[{a}]"), registry) {
                    fail!(e);
                }
            }
        }
    }
    let mut by_id: HashMap<&DocumentId, &Document> = HashMap::new();
    for doc in corpus {
        if by_id.insert(&doc.id, doc).is_some() {
            fail!(PipelineError::Contract(format!("corpus lists document `{}` more than once", doc.id)));
        }
    }
    let mut seen: HashSet<ThoughtId> = spec.layers.iter().flat_map(|l| l.thoughts().map(|t| t.id.clone())).collect();

    let mut pending: VecDeque<LayerSpec> = spec.layers.iter().cloned().collect();
    let mut inputs: Vec<DocumentId> = corpus.iter().map(|d| d.id.clone()).collect();
    let mut prior: Vec<Slot> = Vec::new();
    let mut cache = ScoreMatrix::new();
    let mut position = 0u32;
    while let Some(layer) = pending.pop_front() {
        position += 1;
        let layer = layer.stamped(position);
        let docs: Vec<&Document> = inputs.iter().map(|id| by_id[id]).collect();
        let outcome = match run_layer(&docs, &layer, &prior, registry, query, options, &mut cache) {
            Ok(outcome) => outcome,
            Err(e) => fail!(e),
        };
        match outcome.record.layer_spec().slots() {
            Ok(slots) => prior.extend(slots),
            Err(e) => fail!(e),
        }
        inputs = outcome.survivors;
        trace.layers.push(outcome.record);
        if let Some(expansion) = &options.expansion {
            let record = trace.layers.last().expect("just pushed");
            let extra = match expansion.expand(record, &inputs) {
                Ok(extra) => extra,
                Err(e) => fail!(e),
            };
            for layer in &extra {
                for thought in layer.thoughts() {
                    if !seen.insert(thought.id.clone()) {
                        fail!(PipelineError::Config {
                            path: format!("expansion after layer {position}"),
                            message: format!("thought id `{}` is used more than once", thought.id),
                        });
                    }
                }
            }
            for layer in extra.into_iter().rev() {
                pending.push_front(layer);
            }
        }
    }

    let hierarchy = match Hierarchy::new(prior) {
        Ok(h) => h,
        Err(e) => fail!(e),
    };
    let k = options.top_k.or(spec.top_k).unwrap_or(inputs.len().max(1));
    let output = match top_k(&inputs, &cache, &hierarchy, k) {
        Ok(output) => output,
        Err(e) => fail!(e),
    };
    trace.output = Some(output.clone());
    Ok(PipelineRun {
        output,
        trace,
        matrix: cache,
    })
}
