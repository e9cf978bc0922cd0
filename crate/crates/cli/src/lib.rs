//! The `layerrank` command line: pipeline runs, one-shot ranking, evaluation,
//! baselines and explanations from stored traces.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use layerrank_core::config::ConfigError;
use layerrank_core::corpus::CorpusError;
use layerrank_core::eval::EvalError;
use layerrank_core::explain::ExplainError;
use layerrank_core::output::OutputError;
use layerrank_core::pipeline::PipelineError;
use layerrank_core::providers::{ChatMode, ProviderError};
use layerrank_core::ranking::RankingError;
use serde::de::DeserializeOwned;
use thiserror::Error;

mod commands;
pub mod schema;
pub mod setup;

pub use commands::baseline::Prediction;
pub use commands::explain::TraceExplanation;

#[derive(Debug, Parser)]
#[command(name = "layerrank", version, about = "Layered criteria document ranking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Live,
    Replay,
    Record,
}

impl From<ModeArg> for ChatMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Live => ChatMode::Live,
            ModeArg::Replay => ChatMode::Replay,
            ModeArg::Record => ChatMode::Record,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a pipeline configuration over a corpus.
    Run(commands::run::RunArgs),
    /// One-shot hierarchical top-k from a score fixture, bypassing providers.
    Rank(commands::rank::RankArgs),
    /// Precision, recall and F2 of prediction files against gold relevance.
    Eval(commands::eval::EvalArgs),
    /// BM25 or flat single-layer predictions for comparison tables.
    Baseline(commands::baseline::BaselineArgs),
    /// Re-derive explanations from a stored trace.
    Explain(commands::explain::ExplainArgs),
}

/// What a successful command did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    /// Result, prediction or explanation records written.
    pub records: usize,
    /// Chat requests sent over the network.
    pub network_calls: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("configuration does not match the schema:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    /// Fixture, transcript or credential problems found while setting up providers.
    #[error(transparent)]
    Setup(ProviderError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}:{line}: {message}")]
    Data { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<OutputError> for CliError {
    fn from(error: OutputError) -> Self {
        match error {
            OutputError::Pipeline(e) => e.into(),
            OutputError::Explain(e) => e.into(),
        }
    }
}

impl CliError {
    /// Diagnostic category printed with the error.
    pub fn category(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Config(_) | Self::Schema(_) => "config",
            Self::Corpus(_) | Self::Data { .. } => "input",
            Self::Setup(_) => "provider",
            Self::Pipeline(e) => match e {
                PipelineError::Config { .. } => "config",
                PipelineError::Provider { .. } | PipelineError::Refinement { .. } => "provider",
                _ => "pipeline",
            },
            Self::Ranking(_) | Self::Explain(_) => "pipeline",
            Self::Eval(_) => "eval",
            Self::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "usage" => 2,
            "config" => 3,
            "input" => 4,
            "provider" => 5,
            "pipeline" => 6,
            "eval" => 7,
            _ => 8,
        }
    }
}

/// Parses `args` (program name first) and runs the command. Output that has
/// no file destination goes to `stdout`.
pub fn run_command<I, T>(args: I, stdout: &mut dyn Write) -> Result<Summary, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            write!(stdout, "{e}").map_err(|source| io_error("<stdout>", source))?;
            return Ok(Summary::default());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    match cli.command {
        Command::Run(args) => commands::run::run(&args, stdout),
        Command::Rank(args) => commands::rank::run(&args, stdout),
        Command::Eval(args) => commands::eval::run(&args, stdout),
        Command::Baseline(args) => commands::baseline::run(&args, stdout),
        Command::Explain(args) => commands::explain::run(&args, stdout),
    }
}

pub(crate) fn io_error(path: impl AsRef<Path>, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.as_ref().display().to_string(),
        source,
    }
}

/// Reads one JSON record per non-blank line.
pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| CliError::Data {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}

/// Writes `contents` to `path`, or to `stdout` when `path` is `None`.
pub(crate) fn emit(path: Option<&PathBuf>, stdout: &mut dyn Write, contents: &[u8]) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, contents).map_err(|e| io_error(path, e)),
        None => stdout.write_all(contents).map_err(|e| io_error("<stdout>", e)),
    }
}
