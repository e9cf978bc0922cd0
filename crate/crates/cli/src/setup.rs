//! Loading configurations and wiring providers for a run.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use layerrank_core::config::{ChatConfig, ConfigError, PipelineConfig};
use layerrank_core::corpus::Document;
use layerrank_core::providers::bm25::CorpusStats;
use layerrank_core::providers::chat::{HttpTransport, RetryPolicy};
use layerrank_core::providers::{ChatClient, ChatMode, ProviderRegistry, ScoreFixture, SynonymList, TranscriptStore};

use crate::{io_error, schema, CliError};

/// Reads `path`, checks it against the schema, then parses it.
pub fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
        path: "/".into(),
        message: e.to_string(),
    })?;
    let violations = schema::violations(&value);
    if !violations.is_empty() {
        return Err(CliError::Schema(violations));
    }
    let mut config = PipelineConfig::from_json(&text)?;
    config.resolve_paths(path.parent().unwrap_or(Path::new("")));
    Ok(config)
}

fn invalid(path: &str, message: &str) -> CliError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
    .into()
}

/// Providers for every binding `config` uses. Only replay mode is possible
/// without network access.
pub fn build_registry(config: &PipelineConfig, corpus: &[Document], mode: ChatMode) -> Result<ProviderRegistry, CliError> {
    let mut registry = ProviderRegistry::new();
    if let Some(table) = &config.providers.table {
        registry = registry.with_table(ScoreFixture::load(table).map_err(CliError::Setup)?);
    }
    if config.uses_bm25() {
        registry = registry.with_bm25(CorpusStats::build(corpus));
    }
    if let Some(synonyms) = &config.providers.synonyms {
        registry = registry.with_synonyms(Arc::new(SynonymList::new(synonyms.clone())));
    }
    if config.uses_chat() {
        let chat = config
            .providers
            .chat
            .as_ref()
            .ok_or_else(|| invalid("providers.chat", "chat-backed thoughts need a chat provider section"))?;
        registry = registry.with_chat(chat_client(chat, mode)?);
    }
    Ok(registry)
}

fn chat_client(chat: &ChatConfig, mode: ChatMode) -> Result<ChatClient, CliError> {
    let transcripts = || {
        chat.transcripts
            .as_deref()
            .ok_or_else(|| invalid("providers.chat.transcripts", "replay and record modes need a transcript file"))
    };
    let transport = || -> Result<Box<HttpTransport>, CliError> {
        let timeout = Duration::from_secs(chat.timeout_secs);
        Ok(Box::new(HttpTransport::from_env(&chat.endpoint, &chat.credential_env, timeout).map_err(CliError::Setup)?))
    };
    let client = match mode {
        ChatMode::Replay => ChatClient::replay(TranscriptStore::load(transcripts()?).map_err(CliError::Setup)?),
        ChatMode::Live => ChatClient::live(transport()?),
        ChatMode::Record => ChatClient::record(transport()?, transcripts()?).map_err(CliError::Setup)?,
    };
    Ok(client
        .with_retry(RetryPolicy {
            max_attempts: chat.max_attempts,
            base_delay: Duration::from_millis(chat.backoff_ms),
        })
        .with_max_in_flight(chat.max_in_flight))
}
