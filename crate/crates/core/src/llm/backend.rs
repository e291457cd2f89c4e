use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{prompt_sha256, LlmError, Role, RoleModelConfig};

pub const API_KEY_ENV: &str = "CTRA_API_KEY";

/// A chat-completion provider. Implementations must tolerate concurrent
/// calls even though the pipeline issues them one at a time.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, LlmError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(config, prompt)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(config, prompt)
    }
}

/// OpenAI-compatible `/chat/completions` client. The template is sent as a
/// single user message.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    base_backoff: Duration,
    max_backoff: Duration,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("base_backoff", &self.base_backoff)
            .finish()
    }
}

enum Failure {
    Transient(LlmError),
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(api_key: Option<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpBackend {
            client,
            api_key,
            base_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(10),
        })
    }

    pub fn from_env() -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| LlmError::Config(format!("{API_KEY_ENV} is not set")))?;
        HttpBackend::new(Some(key))
    }

    pub fn with_backoff(mut self, base: Duration, max: Duration) -> Self {
        self.base_backoff = base;
        self.max_backoff = max;
        self
    }

    fn url(endpoint: &str) -> String {
        let base = endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    fn attempt(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, Failure> {
        let body = json!({
            "model": config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        });
        let mut req = self
            .client
            .post(Self::url(&config.endpoint))
            .timeout(config.timeout)
            .json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                Failure::Fatal(LlmError::Timeout(config.timeout))
            } else {
                Failure::Transient(LlmError::Transport {
                    message: e.without_url().to_string(),
                    status: None,
                    retry_after: None,
                })
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            let err = LlmError::Transport {
                message: format!("HTTP {}", status.as_u16()),
                status: Some(status.as_u16()),
                retry_after,
            };
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                Failure::Transient(err)
            } else {
                Failure::Fatal(err)
            });
        }
        let payload: Value = resp.json().map_err(|e| {
            if e.is_timeout() {
                Failure::Fatal(LlmError::Timeout(config.timeout))
            } else {
                Failure::Fatal(LlmError::Transport {
                    message: format!("malformed response body: {}", e.without_url()),
                    status: Some(status.as_u16()),
                    retry_after: None,
                })
            }
        })?;
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                Failure::Fatal(LlmError::Transport {
                    message: "response has no choices[0].message.content".into(),
                    status: Some(status.as_u16()),
                    retry_after: None,
                })
            })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, LlmError> {
        match self.attempt(config, prompt) {
            Ok(text) => Ok(text),
            Err(Failure::Fatal(e)) => Err(e),
            Err(Failure::Transient(e)) => {
                let hinted = match &e {
                    LlmError::Transport { retry_after, .. } => *retry_after,
                    _ => None,
                };
                let delay = hinted.unwrap_or(self.base_backoff).min(self.max_backoff);
                tracing::warn!(role = %config.role, error = %e, ?delay, "retrying once");
                std::thread::sleep(delay);
                match self.attempt(config, prompt) {
                    Ok(text) => Ok(text),
                    Err(Failure::Fatal(e) | Failure::Transient(e)) => Err(e),
                }
            }
        }
    }
}

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub role: Role,
    pub prompt_sha256: String,
    pub response: String,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, LlmError> {
    let file = fs::File::open(path).map_err(|e| LlmError::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| LlmError::Config(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(item);
    }
    Ok(out)
}

pub fn load_replay_entries(path: &Path) -> Result<Vec<ReplayEntry>, LlmError> {
    read_jsonl(path)
}

pub fn write_replay_entries(path: &Path, entries: &[ReplayEntry]) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut file, e)?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

/// Serves `Vec<String>` answers in order; the last one repeats.
#[derive(Debug)]
struct Queues<K> {
    answers: HashMap<K, Vec<String>>,
    served: Mutex<HashMap<K, usize>>,
}

impl<K> Default for Queues<K> {
    fn default() -> Self {
        Queues {
            answers: HashMap::new(),
            served: Mutex::new(HashMap::new()),
        }
    }
}

impl<K: std::hash::Hash + Eq + Clone> Queues<K> {
    fn push(&mut self, key: K, answer: String) {
        self.answers.entry(key).or_default().push(answer);
    }

    fn next(&self, key: &K) -> Option<String> {
        let answers = self.answers.get(key)?;
        let mut served = self.served.lock().unwrap();
        let n = served.entry(key.clone()).or_insert(0);
        let idx = (*n).min(answers.len() - 1);
        *n += 1;
        Some(answers[idx].clone())
    }
}

/// Answers from a recorded transcript keyed by (role, prompt hash).
/// Identical prompts recorded more than once are answered in recording
/// order.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    queues: Queues<(Role, String)>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<ReplayEntry>) -> Self {
        let mut queues = Queues::default();
        for e in entries {
            queues.push((e.role, e.prompt_sha256), e.response);
        }
        ReplayBackend { queues }
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        Ok(ReplayBackend::new(load_replay_entries(path)?))
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, LlmError> {
        let hash = prompt_sha256(prompt);
        self.queues
            .next(&(config.role, hash.clone()))
            .ok_or(LlmError::ReplayMiss {
                role: config.role,
                hash,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEntry {
    pub role: Role,
    pub response: String,
}

/// Answers each role from its own queue regardless of the prompt. Used to
/// author fixtures and to drive the retry loop in tests.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queues: Queues<Role>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        ScriptedBackend::default()
    }

    pub fn with(mut self, role: Role, response: impl Into<String>) -> Self {
        self.queues.push(role, response.into());
        self
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        let mut backend = ScriptedBackend::new();
        for e in read_jsonl::<ScriptedEntry>(path)? {
            backend.queues.push(e.role, e.response);
        }
        Ok(backend)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, LlmError> {
        self.queues.next(&config.role).ok_or_else(|| LlmError::ReplayMiss {
            role: config.role,
            hash: prompt_sha256(prompt),
        })
    }
}

/// Passes calls through and keeps successful exchanges as replay entries.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Mutex<Vec<ReplayEntry>>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn entries(&self) -> Vec<ReplayEntry> {
        self.entries.lock().unwrap().clone()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        write_replay_entries(path, &self.entries())
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, config: &RoleModelConfig, prompt: &str) -> Result<String, LlmError> {
        let response = self.inner.complete(config, prompt)?;
        self.entries.lock().unwrap().push(ReplayEntry {
            role: config.role,
            prompt_sha256: prompt_sha256(prompt),
            response: response.clone(),
        });
        Ok(response)
    }
}
