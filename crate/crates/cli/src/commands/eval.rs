use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use layerrank_core::eval::{compute_metrics, render_table, EvalReport, QueryRun};
use serde::Deserialize;

use crate::commands::baseline::Prediction;
use crate::{emit, read_jsonl, CliError, Summary};

/// Conventions for cases where F2 is undefined.
pub const REPORT_HEADER: &str =
    "# P = 0 when nothing is retrieved; F2 = 0 when P + R = 0; macro = mean over queries; missing predictions count as empty\n";

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold file: one `{"query": …, "relevant": […]}` record per line.
    #[arg(long)]
    pub gold: PathBuf,
    /// Prediction file as `NAME=PATH` or `PATH`; repeat to compare systems.
    #[arg(long = "predictions", required = true)]
    pub predictions: Vec<String>,
    /// Also write the reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Gold {
    query: String,
    relevant: Vec<String>,
}

fn system(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_owned(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let name = path.file_stem().map_or_else(|| spec.to_owned(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

pub fn reports(gold: &[(String, Vec<String>)], systems: &[(String, Vec<Prediction>)]) -> Result<Vec<EvalReport>, CliError> {
    systems
        .iter()
        .map(|(name, predictions)| {
            let retrieved: HashMap<&str, &Vec<String>> = predictions.iter().map(|p| (p.query.as_str(), &p.retrieved)).collect();
            let runs: Vec<QueryRun> = gold
                .iter()
                .map(|(query, relevant)| QueryRun {
                    query: query.clone(),
                    retrieved: retrieved.get(query.as_str()).map(|r| r.to_vec()).unwrap_or_default(),
                    relevant: relevant.clone(),
                })
                .collect();
            Ok(compute_metrics(name.clone(), &runs)?)
        })
        .collect()
}

pub fn run(args: &EvalArgs, stdout: &mut dyn Write) -> Result<Summary, CliError> {
    let gold: Vec<(String, Vec<String>)> = read_jsonl::<Gold>(&args.gold)?.into_iter().map(|g| (g.query, g.relevant)).collect();
    let systems = args
        .predictions
        .iter()
        .map(|spec| {
            let (name, path) = system(spec);
            read_jsonl::<Prediction>(&path).map(|p| (name, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reports = reports(&gold, &systems)?;
    if let Some(path) = &args.json {
        let mut json = serde_json::to_vec_pretty(&reports).expect("reports serialize");
        json.push(b'\n');
        emit(Some(path), stdout, &json)?;
    }
    let table = format!("{REPORT_HEADER}{}", render_table(&reports));
    emit(None, stdout, table.as_bytes())?;
    Ok(Summary {
        records: reports.len(),
        network_calls: 0,
    })
}
