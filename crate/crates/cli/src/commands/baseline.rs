use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use layerrank_core::corpus::load_corpus;
use layerrank_core::hierarchy::{Aggregator, ComparatorSpec, DocumentId, Hierarchy, Slot};
use layerrank_core::providers::{bm25_rank, Bm25Params, CorpusStats, ScoreFixture};
use layerrank_core::ranking::top_k;
use serde::{Deserialize, Serialize};

use crate::setup::load_config;
use crate::{emit, read_jsonl, CliError, Summary};

/// Documents a system retrieved for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub query: String,
    pub retrieved: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(subcommand)]
    pub method: Method,
}

#[derive(Debug, Subcommand)]
pub enum Method {
    /// Okapi BM25 over the corpus, one prediction per query.
    Bm25 {
        #[arg(long)]
        corpus: PathBuf,
        /// One `{"query": <id>, "text": …}` record per line.
        #[arg(long)]
        queries: PathBuf,
        /// Documents kept per query.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, default_value_t = 1.2)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every thought of a configuration pooled into one level and ranked once.
    Flat {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Corpus fixing the document order; the fixture's order when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Query name written to the prediction; the configured query when absent.
        #[arg(long)]
        query_id: Option<String>,
        #[arg(long, value_enum, default_value_t = FlatComparator::WeightedSum)]
        comparator: FlatComparator,
        #[arg(long, default_value_t = 1)]
        top_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlatComparator {
    Local,
    WeightedSum,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRecord {
    query: String,
    text: String,
}

fn render(predictions: &[Prediction]) -> String {
    predictions
        .iter()
        .map(|p| serde_json::to_string(p).expect("predictions serialize") + "\n")
        .collect()
}

pub fn run(args: &BaselineArgs, stdout: &mut dyn Write) -> Result<Summary, CliError> {
    let (predictions, out) = match &args.method {
        Method::Bm25 {
            corpus,
            queries,
            top,
            k1,
            b,
            out,
        } => {
            let corpus = load_corpus(corpus)?;
            let stats = CorpusStats::build(&corpus);
            let params = Bm25Params { k1: *k1, b: *b };
            let predictions = read_jsonl::<QueryRecord>(queries)?
                .into_iter()
                .map(|q| {
                    let ranked = bm25_rank(&stats, &corpus, &q.text, params, Some(*top)).map_err(CliError::Setup)?;
                    Ok(Prediction {
                        query: q.query,
                        retrieved: ranked.into_iter().map(|(i, _)| corpus[i].id.as_str().to_owned()).collect(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            (predictions, out)
        }
        Method::Flat {
            config,
            scores,
            corpus,
            query_id,
            comparator,
            top_k: k,
            out,
        } => {
            let config_path = config;
            let config = load_config(config_path)?;
            let spec = config.to_spec()?;
            let fixture = ScoreFixture::load(scores).map_err(CliError::Setup)?;
            let docs: Vec<DocumentId> = match corpus {
                Some(path) => load_corpus(path)?.into_iter().map(|d| d.id).collect(),
                None => fixture.documents().to_vec(),
            };
            let thoughts = spec
                .layers
                .iter()
                .flat_map(|l| l.thoughts().cloned())
                .map(|mut t| {
                    (t.layer, t.level) = (1, 1);
                    t
                })
                .collect();
            let comparator = match comparator {
                FlatComparator::Local => ComparatorSpec::Local,
                FlatComparator::WeightedSum => ComparatorSpec::global(Aggregator::WeightedSum),
            };
            let hierarchy = Slot::new(thoughts, comparator)
                .and_then(|slot| Hierarchy::new(vec![slot]))
                .map_err(layerrank_core::pipeline::PipelineError::from)?;
            if *k == 0 {
                return Err(CliError::Usage("--top-k must be at least 1".into()));
            }
            let output = top_k(&docs, &fixture.to_matrix(), &hierarchy, *k)?;
            let query = match query_id {
                Some(id) => id.clone(),
                None => config.query_text()?.unwrap_or_else(|| config_path.display().to_string()),
            };
            let prediction = Prediction {
                query,
                retrieved: output.survivors.iter().map(|d| d.as_str().to_owned()).collect(),
            };
            (vec![prediction], out)
        }
    };
    emit(out.as_ref(), stdout, render(&predictions).as_bytes())?;
    Ok(Summary {
        records: predictions.len(),
        network_calls: 0,
    })
}
