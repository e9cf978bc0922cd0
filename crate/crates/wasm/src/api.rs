//! JSON-in, JSON-out operations behind the browser demo.

use std::sync::Arc;

use layerrank_core::config::{ConfigError, PipelineConfig};
use layerrank_core::corpus::{parse_corpus, CorpusError};
use layerrank_core::explain::{explain_excluded, explain_included, ExplainError, Explanation};
use layerrank_core::hierarchy::{ComparatorSpec, DocumentId, Hierarchy, HierarchyError, OptionThought, ScoreMatrix, Slot, ThoughtId};
use layerrank_core::output::{pipeline_records, OutputError, ResultRecord};
use layerrank_core::pipeline::{run_pipeline, AggregationMetric, PipelineError, RunOptions};
use layerrank_core::providers::{CorpusStats, ProviderError, ProviderRegistry, ScoreFixture, SynonymList};
use layerrank_core::ranking::{depth_map, progressive_top_k_staged, top_k, RankingError, Stage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ordered::OrderedScores;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("malformed request: {0}")]
    Request(#[from] serde_json::Error),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("scores: {0}")]
    Scores(ProviderError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Unsupported(String),
}

impl From<OutputError> for ApiError {
    fn from(error: OutputError) -> Self {
        match error {
            OutputError::Pipeline(e) => e.into(),
            OutputError::Explain(e) => e.into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThoughtInput {
    pub id: ThoughtId,
    #[serde(default = "unit")]
    pub weight: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotInput {
    pub thoughts: Vec<ThoughtInput>,
    #[serde(default = "local")]
    pub comparator: ComparatorSpec,
}

fn local() -> ComparatorSpec {
    ComparatorSpec::Local
}

/// A score table and a hierarchy over its thoughts.
#[derive(Debug, Clone, Deserialize)]
pub struct RankRequest {
    /// Scores per document, in document order.
    pub scores: OrderedScores,
    /// Slots, strongest first.
    pub slots: Vec<SlotInput>,
    pub k: usize,
}

mod ordered {
    use std::collections::BTreeMap;

    use serde::de::{MapAccess, Visitor};
    use serde::{Deserialize, Deserializer};

    /// A JSON object of per-document score maps that keeps the documents' written order.
    #[derive(Debug, Clone, Default)]
    pub struct OrderedScores(pub Vec<(String, BTreeMap<String, f64>)>);

    impl<'de> Deserialize<'de> for OrderedScores {
        fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
            struct Entries;
            impl<'de> Visitor<'de> for Entries {
                type Value = OrderedScores;
                fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                    f.write_str("an object mapping document ids to {thought: score} objects")
                }
                fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                    let mut entries = Vec::new();
                    while let Some(entry) = map.next_entry()? {
                        entries.push(entry);
                    }
                    Ok(OrderedScores(entries))
                }
            }
            deserializer.deserialize_map(Entries)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedDocument {
    pub id: DocumentId,
    pub depth: usize,
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankResponse {
    /// Every document by ascending depth, input order within a tier.
    pub documents: Vec<RankedDocument>,
    /// Members of `D_k`.
    pub top: Vec<DocumentId>,
    /// Progressive pruning, one stage per slot.
    pub stages: Vec<Stage>,
}

struct Prepared {
    docs: Vec<DocumentId>,
    matrix: ScoreMatrix,
    hierarchy: Hierarchy,
}

fn prepare(request: &RankRequest) -> Result<Prepared, ApiError> {
    let mut matrix = ScoreMatrix::new();
    let mut docs = Vec::new();
    for (doc, row) in &request.scores.0 {
        let doc = DocumentId::new(doc.as_str())?;
        for (thought, score) in row {
            matrix.insert(doc.clone(), ThoughtId::new(thought.as_str())?, *score)?;
        }
        docs.push(doc);
    }
    let slots = request
        .slots
        .iter()
        .enumerate()
        .map(|(i, slot)| {
            let thoughts = slot
                .thoughts
                .iter()
                .map(|t| OptionThought::new(t.id.clone(), i as u32 + 1, 1).with_weight(t.weight))
                .collect();
            Slot::new(thoughts, slot.comparator)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared {
        docs,
        matrix,
        hierarchy: Hierarchy::new(slots)?,
    })
}

pub fn rank(request: &RankRequest) -> Result<RankResponse, ApiError> {
    let p = prepare(request)?;
    let (ranked, stages) = progressive_top_k_staged(&p.docs, &p.matrix, &p.hierarchy, request.k)?;
    let depths = depth_map(&p.docs, &p.matrix, &p.hierarchy)?;
    let mut documents: Vec<RankedDocument> = depths
        .iter()
        .map(|(id, depth)| RankedDocument {
            id: id.clone(),
            depth,
            included: ranked.contains(id),
        })
        .collect();
    documents.sort_by_key(|d| d.depth);
    Ok(RankResponse {
        documents,
        top: ranked.survivors,
        stages,
    })
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExplainRequest {
    #[serde(flatten)]
    pub rank: RankRequest,
    pub doc: DocumentId,
}

/// Why `doc` is in or out of `D_k`.
pub fn explain(request: &ExplainRequest) -> Result<Explanation, ApiError> {
    let p = prepare(&request.rank)?;
    let k = request.rank.k;
    let ranked = top_k(&p.docs, &p.matrix, &p.hierarchy, k)?;
    if ranked.contains(&request.doc) {
        Ok(explain_included(&p.matrix, &request.doc, k, &ranked, &p.hierarchy, &[])?)
    } else {
        Ok(explain_excluded(&p.matrix, &request.doc, k, &ranked, &p.hierarchy)?)
    }
}

/// A pipeline configuration with in-memory inputs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub config: serde_json::Value,
    /// Line-delimited corpus.
    pub corpus: String,
    /// Line-delimited score fixture for `table` thoughts.
    #[serde(default)]
    pub scores: Option<String>,
    /// Overrides the configured query.
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub explain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSummary {
    pub index: usize,
    pub name: String,
    pub metric: AggregationMetric,
    pub inputs: usize,
    pub survivors: Vec<DocumentId>,
    pub backtracks: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResponse {
    pub results: Vec<ResultRecord>,
    pub layers: Vec<LayerSummary>,
    pub scores_computed: usize,
}

/// Runs a pipeline in one thread. Chat providers are unavailable.
pub fn run(request: &RunRequest) -> Result<RunResponse, ApiError> {
    let config = PipelineConfig::from_json(&request.config.to_string())?;
    if config.uses_chat() {
        return Err(ApiError::Unsupported("chat providers need the command-line tool; use table, keyword, threshold or bm25".into()));
    }
    let spec = config.to_spec()?;
    let corpus = parse_corpus(request.corpus.as_bytes())?;
    let query = request.query.clone().or_else(|| config.query.clone()).unwrap_or_default();
    let mut registry = ProviderRegistry::new();
    if let Some(scores) = &request.scores {
        registry = registry.with_table(ScoreFixture::parse(scores).map_err(ApiError::Scores)?);
    }
    if config.uses_bm25() {
        registry = registry.with_bm25(CorpusStats::build(&corpus));
    }
    if let Some(synonyms) = &config.providers.synonyms {
        registry = registry.with_synonyms(Arc::new(SynonymList::new(synonyms.clone())));
    }
    let options = RunOptions {
        parallelism: 1,
        ..RunOptions::default()
    };
    let run = run_pipeline(&spec, &corpus, &query, &registry, &options).map_err(|f| f.error)?;
    let results = pipeline_records(&run, request.explain)?;
    let layers = run
        .trace
        .layers
        .iter()
        .map(|r| LayerSummary {
            index: r.index,
            name: r.name.clone(),
            metric: r.metric,
            inputs: r.inputs.len(),
            survivors: r.survivors.clone(),
            backtracks: r.backtracks.len(),
            exhausted: r.exhausted,
        })
        .collect();
    Ok(RunResponse {
        results,
        layers,
        scores_computed: run.matrix.len(),
    })
}

/// Parses `request`, applies `op`, and serializes the answer.
pub fn json_call<Req, Resp>(request: &str, op: impl FnOnce(&Req) -> Result<Resp, ApiError>) -> Result<String, ApiError>
where
    Req: for<'de> Deserialize<'de>,
    Resp: Serialize,
{
    let request: Req = serde_json::from_str(request)?;
    let response = op(&request)?;
    Ok(serde_json::to_string(&response)?)
}
