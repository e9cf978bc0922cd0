//! Precision, recall and F2 per query, with macro averages.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("query `{0}` has no relevant documents")]
    EmptyRelevant(String),
    #[error("no queries to evaluate")]
    NoQueries,
}

/// Retrieved and relevant ids for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRun {
    pub query: String,
    pub retrieved: Vec<String>,
    pub relevant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScores {
    pub query: String,
    pub retrieved: usize,
    pub relevant: usize,
    pub hits: usize,
    pub precision: f64,
    pub recall: f64,
    pub f2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub queries: Vec<QueryScores>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroScores,
}

/// 5PR / (4P + R), or 0 when P and R are both 0.
pub fn f2(precision: f64, recall: f64) -> f64 {
    let denominator = 4.0 * precision + recall;
    if denominator == 0.0 {
        0.0
    } else {
        5.0 * precision * recall / denominator
    }
}

/// Scores one query. Duplicate ids count once. Precision is 0 when nothing was retrieved.
pub fn score_query(run: &QueryRun) -> Result<QueryScores, EvalError> {
    let relevant: HashSet<&str> = run.relevant.iter().map(String::as_str).collect();
    if relevant.is_empty() {
        return Err(EvalError::EmptyRelevant(run.query.clone()));
    }
    let retrieved: HashSet<&str> = run.retrieved.iter().map(String::as_str).collect();
    let hits = retrieved.intersection(&relevant).count();
    let precision = if retrieved.is_empty() {
        0.0
    } else {
        hits as f64 / retrieved.len() as f64
    };
    let recall = hits as f64 / relevant.len() as f64;
    Ok(QueryScores {
        query: run.query.clone(),
        retrieved: retrieved.len(),
        relevant: relevant.len(),
        hits,
        precision,
        recall,
        f2: f2(precision, recall),
    })
}

/// Per-query scores and their arithmetic means.
pub fn compute_metrics(system: impl Into<String>, runs: &[QueryRun]) -> Result<EvalReport, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let queries = runs.iter().map(score_query).collect::<Result<Vec<_>, _>>()?;
    let n = queries.len() as f64;
    let mean = |f: fn(&QueryScores) -> f64| queries.iter().map(f).sum::<f64>() / n;
    let macro_avg = MacroScores {
        precision: mean(|q| q.precision),
        recall: mean(|q| q.recall),
        f2: mean(|q| q.f2),
    };
    Ok(EvalReport {
        system: system.into(),
        queries,
        macro_avg,
    })
}

/// Plain-text comparison table, one row per system.
pub fn render_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.system.len()).max().unwrap_or(0).max("system".len());
    let mut out = format!("{:<width$}  {:>9}  {:>9}  {:>9}\n", "system", "F2", "precision", "recall");
    for report in reports {
        let m = report.macro_avg;
        out.push_str(&format!(
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}\n",
            report.system, m.f2, m.precision, m.recall
        ));
    }
    out
}
