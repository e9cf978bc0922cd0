//! Chat-completion scoring with record/replay transcripts.
//!
//! Requests always use deterministic decoding (temperature 0, top-p 1, no
//! penalties). A request is identified by the SHA-256 of its canonical JSON
//! form; transcripts map that digest to the model's reply so a run can be
//! replayed without touching the network.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::ProviderError;
use crate::corpus::Document;

const SYSTEM_PROMPT: &str = "You are assisting with document retrieval. You judge a single document against a single criterion and reply in the exact format requested.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Body of a chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: model.into(),
            messages,
            temperature: 0.0,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
        }
    }

    /// Compact JSON with object keys sorted at every depth.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("request serializes");
        let mut out = String::new();
        write_canonical(&value, &mut out);
        out
    }

    /// Hex SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Reply contract of a scoring prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatTemplate {
    /// `YES` → 1, `NO` → 0.
    YesNo,
    /// `Score: <0-100>` → that integer.
    Score,
}

impl ChatTemplate {
    pub fn render(self, query: &str, criterion: &str, document: &str) -> Vec<ChatMessage> {
        let instruction = match self {
            ChatTemplate::YesNo => {
                "Does the document satisfy the criterion with respect to the query? \
                 Answer with exactly one word: YES or NO."
            }
            ChatTemplate::Score => {
                "Rate how strongly the document satisfies the criterion with respect to the query, \
                 from 0 (not at all) to 100 (fully). 70 or more means the criterion is clearly met. \
                 Reply with a single line of the form `Score: <integer>`."
            }
        };
        vec![
            ChatMessage::system(SYSTEM_PROMPT),
            ChatMessage::user(format!(
                "Query:\n{query}\n\nCriterion:\n{criterion}\n\nDocument:\n{document}\n\n{instruction}"
            )),
        ]
    }

    pub fn parse(self, reply: &str) -> Result<f64, ProviderError> {
        let parse_error = || ProviderError::Parse { raw: reply.to_owned() };
        let trimmed = reply.trim();
        match self {
            ChatTemplate::YesNo => {
                let word = trimmed.trim_end_matches('.');
                if word.eq_ignore_ascii_case("yes") {
                    Ok(1.0)
                } else if word.eq_ignore_ascii_case("no") {
                    Ok(0.0)
                } else {
                    Err(parse_error())
                }
            }
            ChatTemplate::Score => {
                let pattern = Regex::new(r"^(?i:score\s*:\s*)?(\d{1,3})$").expect("valid pattern");
                let captures = pattern.captures(trimmed).ok_or_else(parse_error)?;
                let value: u32 = captures[1].parse().map_err(|_| parse_error())?;
                if value > 100 {
                    return Err(parse_error());
                }
                Ok(f64::from(value))
            }
        }
    }
}

/// A failed exchange with the completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub message: String,
    /// Connection problems, timeouts, 429 and 5xx.
    pub retryable: bool,
}

pub trait ChatTransport: Send + Sync {
    /// Sends one request and returns the assistant message content.
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use super::{ChatRequest, ChatTransport, TransportError};
    use crate::providers::ProviderError;

    /// Blocking HTTP transport for OpenAI-style `/chat/completions` endpoints.
    pub struct HttpTransport {
        client: reqwest::blocking::Client,
        endpoint: String,
        credential: Option<String>,
    }

    impl std::fmt::Debug for HttpTransport {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.debug_struct("HttpTransport")
                .field("endpoint", &self.endpoint)
                .field("has_credential", &self.credential.is_some())
                .finish()
        }
    }

    impl HttpTransport {
        pub fn new(endpoint: impl Into<String>, credential: Option<String>, timeout: Duration) -> Result<Self, ProviderError> {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| ProviderError::Transport {
                    attempts: 0,
                    message: format!("building HTTP client: {e}"),
                })?;
            Ok(Self {
                client,
                endpoint: endpoint.into(),
                credential,
            })
        }

        /// Reads the bearer credential from the environment variable `var`.
        pub fn from_env(endpoint: impl Into<String>, var: &str, timeout: Duration) -> Result<Self, ProviderError> {
            let credential = std::env::var(var).map_err(|_| ProviderError::Credential(var.to_owned()))?;
            Self::new(endpoint, Some(credential), timeout)
        }
    }

    impl ChatTransport for HttpTransport {
        fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
            let mut builder = self.client.post(&self.endpoint).json(request);
            if let Some(credential) = &self.credential {
                builder = builder.bearer_auth(credential);
            }
            let response = builder.send().map_err(|e| TransportError {
                message: e.to_string(),
                retryable: true,
            })?;
            let status = response.status();
            let body = response.text().map_err(|e| TransportError {
                message: format!("reading response body: {e}"),
                retryable: true,
            })?;
            if !status.is_success() {
                return Err(TransportError {
                    message: format!("HTTP {status}: {body}"),
                    retryable: status.is_server_error() || status.as_u16() == 429,
                });
            }
            super::extract_content(&body)
        }
    }
}

/// Pulls `choices[0].message.content` out of a completion response body.
pub fn extract_content(body: &str) -> Result<String, TransportError> {
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| TransportError {
        message: format!("response is not JSON: {e}"),
        retryable: false,
    })?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| TransportError {
            message: format!("response has no choices[0].message.content: {body}"),
            retryable: false,
        })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatMode {
    Live,
    #[default]
    Replay,
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after every failure.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub digest: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranscriptStore {
    responses: HashMap<String, String>,
}

impl TranscriptStore {
    pub fn from_records(records: impl IntoIterator<Item = TranscriptRecord>) -> Result<Self, ProviderError> {
        let mut store = TranscriptStore::default();
        for (i, record) in records.into_iter().enumerate() {
            store.insert(record, i + 1)?;
        }
        Ok(store)
    }

    fn insert(&mut self, record: TranscriptRecord, line: usize) -> Result<(), ProviderError> {
        match self.responses.get(&record.digest) {
            Some(existing) if *existing != record.response => Err(ProviderError::Fixture {
                line,
                message: format!("conflicting responses for digest {}", record.digest),
            }),
            _ => {
                self.responses.insert(record.digest, record.response);
                Ok(())
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let io_error = |source| ProviderError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::open(path).map_err(io_error)?;
        let mut store = TranscriptStore::default();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_error)?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord = serde_json::from_str(&line).map_err(|e| ProviderError::Fixture {
                line: i + 1,
                message: e.to_string(),
            })?;
            store.insert(record, i + 1)?;
        }
        Ok(store)
    }

    pub fn get(&self, digest: &str) -> Option<&str> {
        self.responses.get(digest).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// Counting gate bounding concurrent in-flight requests.
#[derive(Debug)]
struct InFlightGate {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct GatePass<'a>(&'a InFlightGate);

impl InFlightGate {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn enter(&self) -> GatePass<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        GatePass(self)
    }
}

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

/// Completion client shared by every chat-backed thought of a run.
pub struct ChatClient {
    mode: ChatMode,
    transport: Option<Box<dyn ChatTransport>>,
    transcripts: Mutex<TranscriptStore>,
    sink: Option<Mutex<File>>,
    retry: RetryPolicy,
    gate: InFlightGate,
    network_calls: AtomicUsize,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("mode", &self.mode)
            .field("has_transport", &self.transport.is_some())
            .field("retry", &self.retry)
            .field("network_calls", &self.network_calls())
            .finish()
    }
}

impl ChatClient {
    /// Answers only from `transcripts`; never opens a connection.
    pub fn replay(transcripts: TranscriptStore) -> Self {
        Self::build(ChatMode::Replay, None, transcripts, None)
    }

    pub fn live(transport: Box<dyn ChatTransport>) -> Self {
        Self::build(ChatMode::Live, Some(transport), TranscriptStore::default(), None)
    }

    /// Live client that appends every new exchange to the transcript file at `sink`.
    pub fn record(transport: Box<dyn ChatTransport>, sink: &Path) -> Result<Self, ProviderError> {
        let existing = if sink.exists() {
            TranscriptStore::load(sink)?
        } else {
            TranscriptStore::default()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(sink)
            .map_err(|source| ProviderError::Io {
                path: sink.display().to_string(),
                source,
            })?;
        Ok(Self::build(ChatMode::Record, Some(transport), existing, Some(file)))
    }

    fn build(mode: ChatMode, transport: Option<Box<dyn ChatTransport>>, transcripts: TranscriptStore, sink: Option<File>) -> Self {
        Self {
            mode,
            transport,
            transcripts: Mutex::new(transcripts),
            sink: sink.map(Mutex::new),
            retry: RetryPolicy::default(),
            gate: InFlightGate::new(4),
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.gate = InFlightGate::new(limit);
        self
    }

    pub fn mode(&self) -> ChatMode {
        self.mode
    }

    /// Number of requests that reached the transport, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let digest = request.digest();
        if self.mode == ChatMode::Replay {
            let store = self.transcripts.lock().unwrap_or_else(|e| e.into_inner());
            return store
                .get(&digest)
                .map(str::to_owned)
                .ok_or(ProviderError::MissingTranscript { digest });
        }
        let reply = self.send_with_retry(request)?;
        if self.mode == ChatMode::Record {
            self.remember(digest, &reply)?;
        }
        Ok(reply)
    }

    fn send_with_retry(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let transport = self.transport.as_ref().ok_or_else(|| ProviderError::Unresolved("chat transport".into()))?;
        let _pass = self.gate.enter();
        let mut delay = self.retry.base_delay;
        let attempts = self.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match transport.send(request) {
                Ok(reply) => return Ok(reply),
                Err(error) if error.retryable && attempt < attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(error) => {
                    return Err(ProviderError::Transport {
                        attempts: attempt,
                        message: error.message,
                    })
                }
            }
        }
    }

    fn remember(&self, digest: String, reply: &str) -> Result<(), ProviderError> {
        let mut store = self.transcripts.lock().unwrap_or_else(|e| e.into_inner());
        if store.get(&digest) == Some(reply) {
            return Ok(());
        }
        let record = TranscriptRecord {
            digest: digest.clone(),
            response: reply.to_owned(),
        };
        if let Some(sink) = &self.sink {
            let mut file = sink.lock().unwrap_or_else(|e| e.into_inner());
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(file, "{line}").map_err(|source| ProviderError::Io {
                path: "transcript sink".into(),
                source,
            })?;
        }
        store.responses.insert(digest, reply.to_owned());
        Ok(())
    }
}

/// Asks the model to judge `doc` against `criterion` and parses the reply.
pub fn score_chat(
    client: &ChatClient,
    model: &str,
    template: ChatTemplate,
    query: &str,
    criterion: &str,
    doc: &Document,
) -> Result<f64, ProviderError> {
    let request = ChatRequest::new(model, template.render(query, criterion, &doc.text));
    let reply = client.complete(&request)?;
    template.parse(&reply)
}

/// Request asking for less restrictive versions of `criteria`, one per line.
pub fn refinement_request(model: &str, query: &str, criteria: &[String]) -> ChatRequest {
    let listing: String = criteria.iter().map(|c| format!("- {c}\n")).collect();
    ChatRequest::new(
        model,
        vec![
            ChatMessage::system(SYSTEM_PROMPT),
            ChatMessage::user(format!(
                "Query:\n{query}\n\nNo candidate document satisfied these criteria:\n{listing}\n\
                 Rewrite each criterion so that it is less restrictive but still relevant to the query. \
                 Reply with exactly {} lines, one rewritten criterion per line, in the same order, without numbering.",
                criteria.len()
            )),
        ],
    )
}

/// Asks for relaxed criteria; the reply must hold exactly one line per criterion.
pub fn refine_criteria(client: &ChatClient, model: &str, query: &str, criteria: &[String]) -> Result<Vec<String>, ProviderError> {
    let reply = client.complete(&refinement_request(model, query, criteria))?;
    let lines: Vec<String> = reply
        .lines()
        .map(|l| l.trim().trim_start_matches("- ").trim().to_owned())
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() != criteria.len() {
        return Err(ProviderError::Parse { raw: reply });
    }
    Ok(lines)
}
