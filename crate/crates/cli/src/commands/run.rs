use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use layerrank_core::corpus::load_corpus;
use layerrank_core::output::{pipeline_records, render_results};
use layerrank_core::pipeline::{run_pipeline, PipelineTrace, RunOptions};
use layerrank_core::providers::ScoreRecord;

use crate::commands::baseline::Prediction;
use crate::setup::{build_registry, load_config};
use crate::{emit, io_error, CliError, ModeArg, Summary};

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Pipeline configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Line-delimited corpus file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Query text; overrides the configuration's query.
    #[arg(long)]
    pub query: Option<String>,
    /// Depth bound of the terminal ranking.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Result file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the run trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Attach an inclusion explanation to every result.
    #[arg(long)]
    pub explain: bool,
    /// Also write every computed score as a score fixture, usable by `rank`.
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
    /// Also write the retrieved documents as a prediction line, usable by `eval`.
    #[arg(long)]
    pub prediction_out: Option<PathBuf>,
    /// Query name in the prediction line; the query text when absent.
    #[arg(long, requires = "prediction_out")]
    pub query_id: Option<String>,
    /// Chat provider mode; overrides the configuration's mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Provider calls in flight within a layer; overrides the configuration.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

fn write_trace(path: &PathBuf, trace: &PipelineTrace) -> Result<(), CliError> {
    let mut json = serde_json::to_vec_pretty(trace).expect("traces serialize");
    json.push(b'\n');
    std::fs::write(path, json).map_err(|e| io_error(path, e))
}

pub fn run(args: &RunArgs, stdout: &mut dyn Write) -> Result<Summary, CliError> {
    let config = load_config(&args.config)?;
    let spec = config.to_spec()?;
    let query = match &args.query {
        Some(query) => query.clone(),
        None => config.query_text()?.ok_or_else(|| {
            CliError::Usage("no query: pass --query or set `query` in the configuration".into())
        })?,
    };
    if args.top_k == Some(0) || args.parallelism == Some(0) {
        return Err(CliError::Usage("--top-k and --parallelism must be at least 1".into()));
    }
    let corpus = load_corpus(&args.corpus)?;
    let mode = args.mode.map(Into::into).unwrap_or(config.mode);
    let registry = build_registry(&config, &corpus, mode)?;
    let options = RunOptions {
        parallelism: args.parallelism.unwrap_or(config.parallelism),
        top_k: args.top_k,
        expansion: None,
    };
    let network_calls = || registry.chat().map_or(0, |c| c.network_calls());
    let run = match run_pipeline(&spec, &corpus, &query, &registry, &options) {
        Ok(run) => run,
        Err(failure) => {
            if let Some(path) = &args.trace {
                write_trace(path, &failure.trace)?;
            }
            return Err(failure.error.into());
        }
    };
    if let Some(path) = &args.trace {
        write_trace(path, &run.trace)?;
    }
    if let Some(path) = &args.scores_out {
        let mut text = String::new();
        for doc in run.matrix.documents() {
            for (thought, score) in run.matrix.row(doc).into_iter().flatten() {
                let record = ScoreRecord {
                    doc: doc.clone(),
                    thought: thought.clone(),
                    score: *score,
                };
                text.push_str(&serde_json::to_string(&record).expect("scores serialize"));
                text.push('\n');
            }
        }
        std::fs::write(path, text).map_err(|e| io_error(path, e))?;
    }
    if let Some(path) = &args.prediction_out {
        let prediction = Prediction {
            query: args.query_id.clone().unwrap_or_else(|| query.clone()),
            retrieved: run.output.survivors.iter().map(|d| d.as_str().to_owned()).collect(),
        };
        let mut line = serde_json::to_string(&prediction).expect("predictions serialize");
        line.push('\n');
        std::fs::write(path, line).map_err(|e| io_error(path, e))?;
    }
    let records = pipeline_records(&run, args.explain)?;
    emit(args.out.as_ref(), stdout, render_results(&records).as_bytes())?;
    Ok(Summary {
        records: records.len(),
        network_calls: network_calls(),
    })
}
