use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use layerrank_core::explain::{explain_excluded, explain_included, Explanation};
use layerrank_core::hierarchy::{compare_slots, DocumentId, PartialOrdering, ThoughtId};
use layerrank_core::pipeline::{verify_trace, PipelineError, PipelineTrace};
use serde::Serialize;

use crate::{emit, io_error, CliError, Summary};

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Trace written by `run --trace`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Documents to explain; every document the first layer saw when absent.
    #[arg(long = "doc")]
    pub docs: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Explanation of one document's fate in a stored run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TraceExplanation {
    /// Reached the terminal ranking: included in or excluded from `D_k`.
    Ranked(Explanation),
    /// Removed by a layer before the terminal ranking.
    Dropped {
        subject: DocumentId,
        kind: &'static str,
        layer: usize,
        name: String,
        /// Survivor of that layer that beats the subject under every slot up to it.
        #[serde(skip_serializing_if = "Option::is_none")]
        witness: Option<DocumentId>,
        /// Thoughts of a filter layer the subject did not pass.
        #[serde(skip_serializing_if = "Vec::is_empty")]
        failed: Vec<ThoughtId>,
    },
}

pub fn explain_trace(trace: &PipelineTrace, docs: &[DocumentId]) -> Result<Vec<TraceExplanation>, CliError> {
    verify_trace(trace)?;
    let output = trace
        .output
        .as_ref()
        .ok_or_else(|| PipelineError::Contract("the trace has no terminal ranking; the run aborted".into()))?;
    let hierarchy = trace.hierarchy()?;
    let matrix = trace.matrix();
    let hard = trace.hard_thoughts();
    let terminal_input = trace.layers.last().map(|r| r.survivors.as_slice()).unwrap_or_default();
    docs.iter()
        .map(|doc| {
            if output.contains(doc) {
                return Ok(TraceExplanation::Ranked(explain_included(&matrix, doc, output.k, output, &hierarchy, &hard)?));
            }
            if terminal_input.contains(doc) {
                return Ok(TraceExplanation::Ranked(explain_excluded(&matrix, doc, output.k, output, &hierarchy)?));
            }
            let dropped_by = trace
                .layers
                .iter()
                .find(|r| r.inputs.contains(doc) && !r.survivors.contains(doc))
                .ok_or_else(|| CliError::Usage(format!("document `{doc}` does not occur in the trace")))?;
            let spec = dropped_by.layer_spec();
            let mut witness = None;
            let mut failed = Vec::new();
            if spec.metric.is_selection() {
                let mut slots = trace.slots_before(dropped_by.index)?;
                slots.extend(spec.slots()?);
                let mut candidates = dropped_by.survivors.clone();
                candidates.sort();
                for candidate in candidates {
                    let verdict = compare_slots(&matrix, &candidate, doc, &slots).map_err(PipelineError::from)?;
                    if verdict == PartialOrdering::Better {
                        witness = Some(candidate);
                        break;
                    }
                }
            } else if spec.metric.is_filter() {
                failed = spec
                    .thoughts()
                    .filter(|t| matrix.get(doc, &t.id).is_some_and(|s| s <= 0.0))
                    .map(|t| t.id.clone())
                    .collect();
            }
            Ok(TraceExplanation::Dropped {
                subject: doc.clone(),
                kind: "dropped",
                layer: dropped_by.index,
                name: dropped_by.name.clone(),
                witness,
                failed,
            })
        })
        .collect()
}

pub fn run(args: &ExplainArgs, stdout: &mut dyn Write) -> Result<Summary, CliError> {
    let text = std::fs::read_to_string(&args.trace).map_err(|e| io_error(&args.trace, e))?;
    let trace: PipelineTrace = serde_json::from_str(&text).map_err(|e| CliError::Data {
        path: args.trace.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let docs: Vec<DocumentId> = if args.docs.is_empty() {
        trace.layers.first().map(|r| r.inputs.clone()).unwrap_or_default()
    } else {
        args.docs
            .iter()
            .map(|d| DocumentId::new(d.as_str()).map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    let explanations = explain_trace(&trace, &docs)?;
    let text: String = explanations
        .iter()
        .map(|e| serde_json::to_string(e).expect("explanations serialize") + "\n")
        .collect();
    emit(args.out.as_ref(), stdout, text.as_bytes())?;
    Ok(Summary {
        records: explanations.len(),
        network_calls: 0,
    })
}
