//! Line-delimited result files.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::explain::{explain_included, ExplainError, Explanation};
use crate::hierarchy::{DocumentId, Hierarchy, OptionThought, ScoreMatrix, ThoughtId};
use crate::pipeline::{PipelineError, PipelineRun};
use crate::ranking::RankedOutput;

/// One retrieved document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// 1-based position in the result list.
    pub rank: usize,
    pub id: DocumentId,
    pub depth: usize,
    pub scores: BTreeMap<ThoughtId, f64>,
    pub explanation: Option<Explanation>,
}

/// Records for every survivor of `output`, in output order.
///
/// `scores` lists the document's scores on `thoughts`; explanations cover
/// inclusion in `D_k` and fall back to positive thoughts, `hard` included.
pub fn result_records(
    output: &RankedOutput,
    matrix: &ScoreMatrix,
    hierarchy: &Hierarchy,
    hard: &[OptionThought],
    thoughts: &[ThoughtId],
    explain: bool,
) -> Result<Vec<ResultRecord>, ExplainError> {
    output
        .survivors
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let scores = thoughts
                .iter()
                .filter_map(|t| matrix.get(id, t).map(|s| (t.clone(), s)))
                .collect();
            let explanation = if explain {
                Some(explain_included(matrix, id, output.k, output, hierarchy, hard)?)
            } else {
                None
            };
            Ok(ResultRecord {
                rank: i + 1,
                id: id.clone(),
                depth: output.depth(id).expect("survivors carry a depth"),
                scores,
                explanation,
            })
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
}

/// Records for a pipeline run, scored on the thoughts each layer finally used.
pub fn pipeline_records(run: &PipelineRun, explain: bool) -> Result<Vec<ResultRecord>, OutputError> {
    let hierarchy = run.trace.hierarchy()?;
    let thoughts: Vec<ThoughtId> = run
        .trace
        .layers
        .iter()
        .flat_map(|r| r.levels.iter().flatten().map(|t| t.id.clone()))
        .collect();
    Ok(result_records(
        &run.output,
        &run.matrix,
        &hierarchy,
        &run.trace.hard_thoughts(),
        &thoughts,
        explain,
    )?)
}

pub fn write_results(records: &[ResultRecord], mut out: impl Write) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn render_results(records: &[ResultRecord]) -> String {
    let mut buffer = Vec::new();
    write_results(records, &mut buffer).expect("writing to memory");
    String::from_utf8(buffer).expect("JSON is UTF-8")
}
