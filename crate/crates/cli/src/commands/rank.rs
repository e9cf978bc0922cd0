use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use layerrank_core::corpus::load_corpus;
use layerrank_core::hierarchy::{DocumentId, Hierarchy, OptionThought};
use layerrank_core::output::{render_results, result_records};
use layerrank_core::pipeline::apply_filter_metric;
use layerrank_core::providers::ScoreFixture;
use layerrank_core::ranking::top_k;

use crate::setup::load_config;
use crate::{emit, CliError, Summary};

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Configuration whose layers define the hierarchy; providers are ignored.
    #[arg(long)]
    pub config: PathBuf,
    /// Score fixture with every score the hierarchy needs.
    #[arg(long)]
    pub scores: PathBuf,
    /// Corpus fixing the document order; the fixture's order when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub explain: bool,
}

/// Filter layers act as the hard slot; every other layer contributes its
/// levels to one flat hierarchy ranked in a single pass. Without an explicit
/// depth bound, configurations with a selection layer keep depth 0 only.
pub fn run(args: &RankArgs, stdout: &mut dyn Write) -> Result<Summary, CliError> {
    let config = load_config(&args.config)?;
    let spec = config.to_spec()?;
    let fixture = ScoreFixture::load(&args.scores).map_err(CliError::Setup)?;
    let matrix = fixture.to_matrix();
    let mut docs: Vec<DocumentId> = match &args.corpus {
        Some(path) => load_corpus(path)?.into_iter().map(|d| d.id).collect(),
        None => fixture.documents().to_vec(),
    };
    let mut hard: Vec<OptionThought> = Vec::new();
    for layer in spec.layers.iter().filter(|l| l.metric.is_filter()) {
        docs = apply_filter_metric(&docs, &matrix, layer)?;
        hard.extend(layer.thoughts().cloned());
    }
    let hierarchy = Hierarchy::new(spec.comparator_slots()?).map_err(layerrank_core::pipeline::PipelineError::from)?;
    // a selection layer keeps only its maximal set, so the staged run ends at depth 0
    let default_k = if spec.layers.iter().any(|l| l.metric.is_selection()) { 1 } else { docs.len().max(1) };
    let k = args.top_k.or(spec.top_k).unwrap_or(default_k);
    let output = top_k(&docs, &matrix, &hierarchy, k)?;
    let thoughts: Vec<_> = spec.layers.iter().flat_map(|l| l.thoughts().map(|t| t.id.clone())).collect();
    let records = result_records(&output, &matrix, &hierarchy, &hard, &thoughts, args.explain)?;
    emit(args.out.as_ref(), stdout, render_results(&records).as_bytes())?;
    Ok(Summary {
        records: records.len(),
        network_calls: 0,
    })
}
