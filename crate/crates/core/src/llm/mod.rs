//! Prompt rendering, chat-completion backends (live HTTP, replay, scripted)
//! and tolerant extraction of the payloads each agent expects.

mod backend;
mod extract;
mod prompts;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    load_replay_entries, write_replay_entries, ChatBackend, HttpBackend, RecordingBackend, ReplayBackend, ReplayEntry,
    ScriptedBackend, ScriptedEntry, API_KEY_ENV,
};
pub use extract::{extract_json_array, extract_json_object, extract_sql};
pub use prompts::{render_prompt, template, PromptContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    QuestionCreation,
    QueryBuilder,
    CodeCheck,
    Reflect,
    Report,
    Chart,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::QuestionCreation,
        Role::QueryBuilder,
        Role::CodeCheck,
        Role::Reflect,
        Role::Report,
        Role::Chart,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::QuestionCreation => "question_creation",
            Role::QueryBuilder => "query_builder",
            Role::CodeCheck => "code_check",
            Role::Reflect => "reflect",
            Role::Report => "report",
            Role::Chart => "chart",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 4000;
pub const DEFAULT_ENDPOINT: &str = "http://localhost:8000/v1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleModelConfig {
    pub role: Role,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub endpoint: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl RoleModelConfig {
    pub fn default_for(role: Role) -> Self {
        let model_name = match role {
            Role::QuestionCreation | Role::Chart => "meta-llama/Llama-3.1-70B-Instruct",
            Role::QueryBuilder | Role::CodeCheck | Role::Reflect => "deepseek-ai/DeepSeek-R1",
            Role::Report => "meta-llama/Llama-3.1-405B-Instruct",
        };
        RoleModelConfig {
            role,
            model_name: model_name.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

pub fn default_role_configs() -> BTreeMap<Role, RoleModelConfig> {
    Role::ALL
        .into_iter()
        .map(|r| (r, RoleModelConfig::default_for(r)))
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("prompt for {role} needs a value for {{{name}}}")]
    MissingPlaceholder { role: Role, name: &'static str },
    #[error("transport error: {message}")]
    Transport {
        message: String,
        status: Option<u16>,
        retry_after: Option<Duration>,
    },
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("no recorded response for {role} prompt {hash}")]
    ReplayMiss { role: Role, hash: String },
    #[error("no JSON {0} found in response")]
    NoJsonFound(&'static str),
    #[error("JSON has the wrong shape: {0}")]
    WrongShape(String),
    #[error("no SELECT statement found in response")]
    NoSelectFound,
    #[error("{0}")]
    Config(String),
}

/// Hex SHA-256 of a rendered prompt; the replay lookup key.
pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatExchange {
    pub role: Role,
    pub rendered_prompt: String,
    pub raw_response: String,
    #[serde(skip)]
    pub latency: Duration,
}

/// Renders prompts, dispatches them to a backend with the role's model
/// config, and keeps a transcript of successful exchanges.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    configs: BTreeMap<Role, RoleModelConfig>,
    transcript: Mutex<Vec<ChatExchange>>,
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>, configs: BTreeMap<Role, RoleModelConfig>) -> Self {
        Gateway {
            backend,
            configs,
            transcript: Mutex::new(Vec::new()),
        }
    }

    pub fn with_defaults(backend: Box<dyn ChatBackend>) -> Self {
        Gateway::new(backend, default_role_configs())
    }

    pub fn config(&self, role: Role) -> RoleModelConfig {
        self.configs
            .get(&role)
            .cloned()
            .unwrap_or_else(|| RoleModelConfig::default_for(role))
    }

    pub fn complete(&self, role: Role, prompt: &str) -> Result<String, LlmError> {
        let config = self.config(role);
        let started = Instant::now();
        let response = self.backend.complete(&config, prompt)?;
        tracing::debug!(role = %role, chars = response.len(), "completion");
        self.transcript.lock().unwrap().push(ChatExchange {
            role,
            rendered_prompt: prompt.to_string(),
            raw_response: response.clone(),
            latency: started.elapsed(),
        });
        Ok(response)
    }

    pub fn ask(&self, role: Role, ctx: &PromptContext) -> Result<String, LlmError> {
        let prompt = render_prompt(role, ctx)?;
        self.complete(role, &prompt)
    }

    pub fn transcript(&self) -> Vec<ChatExchange> {
        self.transcript.lock().unwrap().clone()
    }
}
